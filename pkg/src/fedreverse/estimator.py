"""Scikit-learn style front end over the block engine.

WatermarkEmbedder treats a 2-D array of shape (num_blocks, r) as the cover:
transform embeds every client's payload, inverse_transform restores the
original blocks exactly, and extract decodes payloads from watermarked
blocks. Parameters follow the get_params/set_params contract, so the
estimator clones and composes in sklearn pipelines.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .errors import KeySetError
from .multiparty import EmbeddingPlan, Payload, embed_payloads, extract_payload, recover_sequence

__all__ = ["WatermarkEmbedder"]


class WatermarkEmbedder(BaseEstimator, TransformerMixin):
    """Multiparty reversible watermark as a fit/transform/inverse_transform triple.

    Parameters
    ----------
    keys : sequence of ClientKey
        Pairwise-orthogonal client keys whose dimension equals the number
        of columns of X.
    payloads : mapping of client id to bytes, optional
        Message bytes per client; clients without an entry embed padding
        zeros. Values may also be (bytes, bit_length) pairs.
    """

    def __init__(self, keys=(), payloads=None):
        self.keys = keys
        self.payloads = payloads

    def _validate(self, X):
        return check_array(X, dtype=np.float64, ensure_2d=True)

    def _payload_list(self, num_blocks):
        out = []
        for cid, value in (self.payloads or {}).items():
            data, bits = (value if isinstance(value, tuple) else (value, None))
            out.append(Payload(client_id=str(cid), data=data, bit_length=bits))
        return out

    def fit(self, X, y=None):
        X = self._validate(X)
        if not self.keys:
            raise KeySetError("at least one client key is required")
        plan = EmbeddingPlan(
            dimension=X.shape[1],
            num_blocks=X.shape[0],
            client_order=tuple(k.client_id for k in self.keys),
        )
        # dry run over zero payloads validates orthogonality, dimensions, capacity
        embed_payloads(np.zeros(X.size), plan, self._payload_list(plan.num_blocks), self.keys)
        self.plan_ = plan
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self, X):
        if not hasattr(self, "plan_"):
            raise NotFittedError("this WatermarkEmbedder instance is not fitted yet")
        X = self._validate(X)
        if X.shape != (self.plan_.num_blocks, self.plan_.dimension):
            raise KeySetError(
                f"X has shape {X.shape}, fitted plan expects "
                f"({self.plan_.num_blocks}, {self.plan_.dimension})"
            )
        return X

    def transform(self, X):
        X = self._check_fitted(X)
        flat = embed_payloads(
            X.ravel(), self.plan_, self._payload_list(self.plan_.num_blocks), self.keys
        )
        return flat.reshape(X.shape)

    def inverse_transform(self, Y):
        Y = self._check_fitted(Y)
        return recover_sequence(Y.ravel(), self.plan_, self.keys).reshape(Y.shape)

    def extract(self, Y, client_id=None, bit_length=None):
        """Decode payload bytes from watermarked blocks.

        With client_id, returns bytes for that client; otherwise a dict for
        every client that has a payload entry. bit_length defaults to the
        length of the configured payload for the client.
        """
        Y = self._check_fitted(Y)
        payloads = {p.client_id: p for p in self._payload_list(self.plan_.num_blocks)}
        if client_id is None:
            return {
                cid: self.extract(Y, cid) for cid in payloads
            }
        key = next((k for k in self.keys if k.client_id == str(client_id)), None)
        if key is None:
            raise KeySetError(f"no key for client {client_id!r}")
        if bit_length is None:
            bit_length = payloads[str(client_id)].bit_length if str(client_id) in payloads else 0
        return extract_payload(Y.ravel(), self.plan_, key, bit_length)
