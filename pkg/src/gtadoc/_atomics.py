"""CPU atomic primitives for the numba kernels.

LLVM atomicrmw/cmpxchg instructions exposed as intrinsics over int64
array elements. These make the per-entry lock protocol and all shared
counters safe under real threads running nogil kernels:

  atomic_add   fetch-and-add, monotonic (commutative integer counters)
  atomic_cas   compare-and-swap, acquire on success (lock acquisition)
  atomic_xchg  exchange with release ordering (publish / unlock)
  atomic_load  acquire load (reading published bucket heads)
"""

from __future__ import annotations

from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


def _elem_ptr(context, builder, arr_type, arr_value, idx):
    ary = context.make_array(arr_type)(context, builder, arr_value)
    return cgutils.get_item_pointer(context, builder, arr_type, ary, [idx])


@intrinsic
def atomic_add(typingctx, arr, idx, val):
    """Atomically add `val` to arr[idx]; returns the previous value."""
    sig = types.int64(arr, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("add", ptr, args[2], "monotonic")

    return sig, codegen


@intrinsic
def atomic_cas(typingctx, arr, idx, expected, new):
    """Compare-and-swap on arr[idx]; returns the previous value."""
    sig = types.int64(arr, types.int64, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        pair = builder.cmpxchg(ptr, args[2], args[3], "acq_rel", "monotonic")
        return builder.extract_value(pair, 0)

    return sig, codegen


@intrinsic
def atomic_xchg(typingctx, arr, idx, val):
    """Store `val` into arr[idx] with release ordering; returns old value."""
    sig = types.int64(arr, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("xchg", ptr, args[2], "release")

    return sig, codegen


@intrinsic
def atomic_load(typingctx, arr, idx):
    """Acquire load of arr[idx]."""
    sig = types.int64(arr, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        load = builder.load_atomic(ptr, ordering="acquire", align=8)
        return load

    return sig, codegen
