"""Sealed-bid multi-item auctions with anonymous, deposit-backed bids.

Bidders obtain threshold blind signatures over their bids, reveal them from
fresh addresses, and a descending-price solver computes the minimal
equilibrium prices. A simulated contract settles the result and discards
wrong solutions on cheap misbehaviour proofs.
"""

from importlib import resources

from .vda import Solution, VdaConfig, run_vda, vcg_oracle

__all__ = ["Solution", "VdaConfig", "run_vda", "vcg_oracle", "fixture_path"]


def fixture_path(name: str):
    """Path of a bundled scenario, e.g. ``fixture_path("proofs")``."""
    return resources.files(__package__) / "fixtures" / f"{name}.yaml"
