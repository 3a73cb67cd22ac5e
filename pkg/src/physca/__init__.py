"""A reversible 16-state particle CA and a compiler from NAND circuits to gadgets."""
from .core_ca import Configuration, from_particles, run, step, step_inverse
from .circuit import Netlist, builtin, parse_netlist
from .gadget_synth import GadgetPlan, synthesize, verify_plan
from .estimator import PhysicalCompiler

__version__ = "0.1.0"

__all__ = ["Configuration", "from_particles", "run", "step", "step_inverse", "Netlist",
           "builtin", "parse_netlist", "GadgetPlan", "synthesize", "verify_plan",
           "PhysicalCompiler"]
