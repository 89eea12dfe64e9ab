"""Python bindings for the lazy tensor runtime."""

from ._core import (
    Error,
    Tensor,
    add,
    argsort,
    donation_enabled,
    from_list,
    full,
    get_mode,
    mark_step,
    matmul,
    maximum,
    metrics,
    narrow,
    nonzero_count,
    pending_ir,
    permute,
    randn,
    relu,
    set_donation,
    set_mode,
    sum,
    sum_all,
    sync,
    view,
)

__all__ = [
    "Error",
    "Tensor",
    "add",
    "argsort",
    "donation_enabled",
    "from_list",
    "full",
    "get_mode",
    "mark_step",
    "matmul",
    "maximum",
    "metrics",
    "narrow",
    "nonzero_count",
    "pending_ir",
    "permute",
    "randn",
    "relu",
    "set_donation",
    "set_mode",
    "sum",
    "sum_all",
    "sync",
    "view",
]
