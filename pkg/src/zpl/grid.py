"""zeta(-k + 2 pi i d n) for n = 1..N, with block recurrences and a disk cache.

Points are grouped in fixed blocks of BLOCK consecutive n.  The first point
of a block is an ordinary :func:`zeta` call; the rest update the vector of
unit powers m^(-i tau n) by one multiplication per entry (tau = 2 pi d).
Block boundaries, precisions and truncation points depend only on
(k, d, n, ctx), never on N or on how blocks are spread over workers, so
every stored value is reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import gmpy2
import numpy as np
from filelock import FileLock
from gmpy2 import mpc, mpz

from .errors import GridMismatch, ValidationError, ZetaPointError, ZPLError
from .exact import ExactReal
from .hp import DEFAULT_CONTEXT, HPComplex, HPReal, PrecisionContext, conj, mpfr_from_hex, mpfr_to_hex, workprec
from .zeta import _em_tail, unit_powers, zeta, zeta_plan

BLOCK = 64
FORMAT_VERSION = 1


def d_bits(ctx: PrecisionContext) -> int:
    """Precision at which a step d is materialized for grids under ``ctx``."""
    return ctx.target_bits + ctx.guard_bits + 128


def materialize_d(d, ctx: PrecisionContext) -> HPReal:
    if isinstance(d, ExactReal):
        return d.at(d_bits(ctx))
    if isinstance(d, HPReal):
        return d
    raise ValidationError(f"d must be an mpfr or exact real, got {type(d).__name__}")


def _tau_float(d: HPReal) -> float:
    return 2 * math.pi * float(d)


def point_plan(k: int, d: HPReal, n: int, ctx: PrecisionContext):
    return zeta_plan(-k, _tau_float(d) * n, ctx)


def grid_point(k: int, d, n: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """s = -k + 2 pi i d n at the precision the grid uses for point n."""
    d = materialize_d(d, ctx)
    plan = point_plan(k, d, n, ctx)
    with workprec(plan.wp):
        return mpc(-k, 2 * gmpy2.const_pi() * d * n)


@dataclass
class ZetaGrid:
    """zeta(-k + 2 pi i d n) for n = 1..N; negative n come from conjugation."""

    k: int
    d: HPReal
    values: list
    precision_bits: int
    guard_bits: int = DEFAULT_CONTEXT.guard_bits
    cache_keys: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> HPComplex:
        if n == 0 or abs(n) > self.N:
            raise IndexError(n)
        z = self.values[abs(n) - 1]
        return z if n > 0 else conj(z)

    def check(self, k: int, d: HPReal, N: int) -> None:
        if k != self.k or d != self.d or N > self.N:
            raise GridMismatch(
                f"grid (k={self.k}, N={self.N}) does not cover k={k}, N={N} at the requested d"
            )


def _block_values(k: int, d: HPReal, block: int, upto: int, ctx: PrecisionContext) -> list:
    """Values for n in block ``block`` with n <= upto."""
    n0 = block * BLOCK + 1
    n_end = n0 + BLOCK - 1
    plans = [point_plan(k, d, n, ctx) for n in range(n0, n_end + 1)]
    top = max(p.M for p in plans)
    wp = max(p.wp for p in plans) + math.ceil(math.log2(BLOCK)) + 4
    ctx.check(wp)
    out = []
    try:
        out.append(zeta(grid_point(k, d, n0, ctx), ctx))
    except ZPLError as exc:
        raise ZetaPointError(n0, exc) from exc
    last = min(n_end, upto)
    if last == n0:
        return out
    with workprec(wp):
        tau = 2 * gmpy2.const_pi() * d
        P = unit_powers(tau * n0, top)
        step = unit_powers(tau, top)
        weights = np.array([mpz(m) ** k for m in range(top + 1)], dtype=object)
        for n in range(n0 + 1, last + 1):
            plan = plans[n - n0]
            P[1:] = P[1:] * step[1:]
            s = mpc(-k, tau * n)
            head = np.dot(weights[1 : plan.M], P[1 : plan.M])
            tail = _em_tail(s, plan.M, plan.nu, weights[plan.M] * P[plan.M])
            value = head + tail
            with workprec(plan.out_bits):
                out.append(mpc(value))
    return out


def _run_blocks(args) -> list:
    k, d, blocks, upto, ctx = args
    return [(b, _block_values(k, d, b, upto, ctx)) for b in blocks]


def _compute(k: int, d: HPReal, blocks: list[int], upto: int, ctx: PrecisionContext, workers: int) -> dict:
    """{n: value} for every n <= upto in the given blocks."""
    if workers <= 1 or len(blocks) <= 1:
        results = _run_blocks((k, d, blocks, upto, ctx))
    else:
        # Interleave so each worker gets a mix of cheap (low) and costly (high) blocks.
        chunks = [blocks[i::workers] for i in range(workers)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = [r for part in pool.map(_run_blocks, [(k, d, c, upto, ctx) for c in chunks]) for r in part]
    out = {}
    for b, values in results:
        for i, z in enumerate(values):
            out[b * BLOCK + 1 + i] = z
    return out


class GridCache:
    """Directory of JSONL grid files, one file per (k, d, target, guard)."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    @staticmethod
    def default_root() -> Path | None:
        env = os.environ.get("ZPL_CACHE_DIR")
        return Path(env) if env else None

    def key(self, k: int, d: HPReal, ctx: PrecisionContext) -> str:
        digest = hashlib.sha1(mpfr_to_hex(d).encode()).hexdigest()[:16]
        return f"grid_k{k}_{digest}_p{ctx.target_bits}g{ctx.guard_bits}"

    def path(self, key: str) -> Path:
        return self.root / f"{key}.jsonl"

    def load(self, k: int, d: HPReal, ctx: PrecisionContext) -> dict:
        path = self.path(self.key(k, d, ctx))
        if not path.exists():
            return {}
        d_hex = mpfr_to_hex(d)
        out = {}
        with path.open() as fh:
            for line in fh:
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted writer
                if "n" not in rec:
                    continue
                if rec["k"] != k or rec["d_hex"] != d_hex or rec["precision_bits"] != ctx.target_bits:
                    continue
                n = rec["n"]
                bits = point_plan(k, d, n, ctx).out_bits
                with workprec(bits):
                    out[n] = mpc(mpfr_from_hex(rec["re_hex"], bits), mpfr_from_hex(rec["im_hex"], bits))
        return out

    def store(self, k: int, d: HPReal, ctx: PrecisionContext, values: dict) -> None:
        if not values:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(self.key(k, d, ctx))
        d_hex = mpfr_to_hex(d)
        with FileLock(str(path) + ".lock"):
            new = not path.exists()
            with path.open("a") as fh:
                if new:
                    header = {
                        "format_version": FORMAT_VERSION,
                        "k": k,
                        "d_hex": d_hex,
                        "precision_bits": ctx.target_bits,
                        "guard_bits": ctx.guard_bits,
                        "block": BLOCK,
                    }
                    fh.write(json.dumps(header) + "\n")
                for n in sorted(values):
                    z = values[n]
                    rec = {
                        "k": k,
                        "d_hex": d_hex,
                        "n": n,
                        "precision_bits": ctx.target_bits,
                        "re_hex": mpfr_to_hex(z.real),
                        "im_hex": mpfr_to_hex(z.imag),
                    }
                    fh.write(json.dumps(rec) + "\n")

    def files(self) -> list[Path]:
        if not self.root.exists():
            return []
        return sorted(self.root.glob("grid_*.jsonl"))

    def stats(self) -> list[dict]:
        rows = []
        for path in self.files():
            header, count = None, 0
            with path.open() as fh:
                for line in fh:
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        continue
                    if "n" in rec:
                        count += 1
                    elif header is None:
                        header = rec
            rows.append(
                {
                    "file": path.name,
                    "k": header["k"] if header else None,
                    "precision_bits": header["precision_bits"] if header else None,
                    "records": count,
                    "bytes": path.stat().st_size,
                }
            )
        return rows

    def vacuum(self, keep_bits: int) -> list[str]:
        """Delete grid files whose target precision differs from ``keep_bits``."""
        removed = []
        for row in self.stats():
            if row["precision_bits"] != keep_bits:
                path = self.root / row["file"]
                with FileLock(str(path) + ".lock"):
                    path.unlink(missing_ok=True)
                Path(str(path) + ".lock").unlink(missing_ok=True)
                removed.append(row["file"])
        return removed


def zeta_grid(
    k: int,
    d,
    N: int,
    ctx: PrecisionContext = DEFAULT_CONTEXT,
    *,
    workers: int = 1,
    cache: GridCache | str | os.PathLike | None = None,
) -> ZetaGrid:
    """All zeta(-k + 2 pi i d n), n = 1..N, reusing and extending a cache."""
    if k < 0 or N < 1:
        raise ValidationError("need k >= 0 and N >= 1")
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    d = materialize_d(d, ctx)
    if d <= 0:
        raise ValidationError("d must be positive")
    if cache is not None and not isinstance(cache, GridCache):
        cache = GridCache(cache)
    known = cache.load(k, d, ctx) if cache else {}
    missing = [n for n in range(1, N + 1) if n not in known]
    keys = [cache.key(k, d, ctx)] if cache else []
    if missing:
        blocks = sorted({(n - 1) // BLOCK for n in missing})
        fresh = _compute(k, d, blocks, N, ctx, workers)
        fresh = {n: z for n, z in fresh.items() if n not in known}
        if cache:
            cache.store(k, d, ctx, fresh)
        known.update(fresh)
    values = [known[n] for n in range(1, N + 1)]
    return ZetaGrid(k, d, values, ctx.target_bits, ctx.guard_bits, keys)


def grid_values(grid: ZetaGrid, ns: Iterable[int]) -> list:
    return [grid[n] for n in ns]
