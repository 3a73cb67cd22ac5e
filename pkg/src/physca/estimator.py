"""scikit-learn style wrapper: fit compiles a gadget, transform runs it on block patterns."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .circuit import Netlist, apply_block, builtin, parse_netlist
from .core_ca import run_block_batch
from .gadget_synth import synthesize


class PhysicalCompiler(TransformerMixin, BaseEstimator):
    """Compile a block function into a gadget.

    ``h`` is a builtin name, netlist text, or a ``Netlist`` on ``4 * n_cells``
    bits. ``X`` holds one block pattern per row, one cell value (0..15) per
    column; ``transform`` returns the block after ``t_final`` steps of the
    physical CA with the gadget present.
    """

    def __init__(self, n_cells: int = 1, h="identity", scale: int = 1, max_attempts: int = 6):
        self.n_cells = n_cells
        self.h = h
        self.scale = scale
        self.max_attempts = max_attempts

    def _netlist(self) -> Netlist:
        if isinstance(self.h, Netlist):
            return self.h
        if isinstance(self.h, str) and "\n" in self.h:
            return parse_netlist(self.h)
        return builtin(self.h, self.n_cells)

    def _check_patterns(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != self.n_cells:
            raise ValueError(f"expected {self.n_cells} cell(s) per row, got {X.shape[1]}")
        if X.min() < 0 or X.max() > 15:
            raise ValueError("cell values must lie in 0..15")
        return X

    def fit(self, X=None, y=None):
        """Synthesize the plan; ``X`` and ``y`` are accepted for API symmetry and ignored."""
        if not isinstance(self.n_cells, int) or self.n_cells < 1:
            raise ValueError("n_cells must be a positive integer")
        self.netlist_ = self._netlist()
        self.plan_ = synthesize(self.n_cells, self.netlist_, scale=self.scale,
                                max_attempts=self.max_attempts)
        self.t_final_ = self.plan_.t_final
        self.n_particles_ = len(self.plan_.added_particles)
        self.n_features_in_ = self.n_cells
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "plan_")
        X = self._check_patterns(X)
        return run_block_batch(self.plan_.gadget(), X, self.t_final_, 0, self.n_cells - 1)

    def predict(self, X) -> np.ndarray:
        return self.transform(X)

    def score(self, X, y=None) -> float:
        """Fraction of rows on which the physical run equals ``h`` (or ``y`` when given)."""
        X = self._check_patterns(X)
        got = self.transform(X)
        if y is None:
            y = np.array([apply_block(self.netlist_, row) for row in X.tolist()])
        else:
            y = check_array(y, dtype=np.int64)
        return float(np.mean(np.all(got == y, axis=1)))
