"""cloudvault: policy-routed data protection across untrusted storage providers.

The package dispatches data objects to protection pipelines chosen from the
object's secret level and the operations the owner still needs over it:
keep-local, plain single-cloud, entropy-aware split plus threshold sharing
plus audit tokens, or additively homomorphic storage. Everything remote is
treated as curious and failure-prone; everything needed to come back to the
plaintext stays in the local manifest and keystore.
"""

__version__ = "0.1.0"

from . import (
    anonymize,
    config,
    entropy_split,
    field,
    homomorphic,
    integrity,
    persistence,
    ranking,
    router,
    shamir,
    simcloud,
)

__all__ = [
    "anonymize",
    "config",
    "entropy_split",
    "field",
    "homomorphic",
    "integrity",
    "persistence",
    "ranking",
    "router",
    "shamir",
    "simcloud",
    "__version__",
]
