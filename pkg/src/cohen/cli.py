"""Command-line front end: ``cohen collect | verify | basis | perm``.

Exit codes: 0 success (Inconclusive verdicts only warn), 1 a Falsified or
NonMember result, 2 bad input.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import random
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Optional

from . import __version__
from . import words as W
from .collect import (CacheMismatch, ContextError, GroupContext, Integers, ModPrimePower,
                      cache_filename, consistency_check, format_nf, load_cache, make_context,
                      parse_mode, random_expr, save_cache, collect)
from .identities import (FALSIFIED, VERIFIED, IdentityReport, binomial_valuation_failures,
                         lhs_engel, lhs_pr, lhs_q1, lhs_q2, power_recursion_pr,
                         rhs_engel_decomposition, rhs_q1, rhs_q2, rhs_shuffle_form,
                         verify_identity)
from .perm import lemma_sums, perm_table, stirling2
from .subgroups import INCONCLUSIVE, NON_MEMBER, ClaimRangeError, check_claim_params, verify_claims

__all__ = ["main", "RunManifest", "run_verify", "strip_volatile", "REPORT_SCHEMA", "CLAIM_CHOICES"]

REPORT_SCHEMA = 1

CLAIM_CHOICES = ("q1", "q2", "engel", "shuffle", "pr", "lemma22", "lemma23", "lemma25", "lemma26",
                 "prop27-np2", "prop27-np1", "cor28", "remark-r1", "consistency", "all")

# default n for each claim when --n is not given (and for ``all``)
DEFAULT_N = {"q1": 4, "q2": 4, "engel": 3, "shuffle": 3, "pr": 3, "lemma22": 8, "lemma23": 8,
             "lemma25": 3, "lemma26": 3, "prop27-np2": 3, "prop27-np1": 3, "cor28": 4,
             "remark-r1": 4, "consistency": 4}


class UsageError(ValueError):
    """Parameters outside what a claim supports; exit code 2."""


@dataclass
class RunManifest:
    tool_version: str
    timestamp: str
    context: dict
    reports: list = field(default_factory=list)

    @property
    def overall(self) -> str:
        statuses = [r.status for r in self.reports]
        if any(s in (FALSIFIED, NON_MEMBER, "Error") for s in statuses):
            return "fail"
        if any(s in (INCONCLUSIVE, "Skipped") for s in statuses):
            return "mixed"
        return "pass"

    def inconclusive(self) -> list:
        return [i for i, r in enumerate(self.reports) if r.status == INCONCLUSIVE]

    def to_json(self) -> dict:
        return {
            "report-schema": REPORT_SCHEMA,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "context": self.context,
            "reports": [r.to_json() for r in self.reports],
            "inconclusive": self.inconclusive(),
            "overall": self.overall,
        }


def strip_volatile(doc: dict) -> dict:
    """Copy of a manifest without wall-clock fields (timestamp, elapsed_ms)."""
    out = {k: v for k, v in doc.items() if k != "timestamp"}
    out["reports"] = [{k: v for k, v in r.items() if k != "elapsed_ms"} for r in doc["reports"]]
    return out


# -- contexts and cache ---------------------------------------------------------------

class ContextPool:
    """One shared context per ``(n, mode)``, optionally backed by a cache directory."""

    def __init__(self, cache_dir: Optional[str] = None):
        self.cache_dir = cache_dir
        self.contexts: dict = {}
        self._lock = threading.Lock()

    def get(self, n: int, mode) -> GroupContext:
        key = (n, mode)
        with self._lock:
            ctx = self.contexts.get(key)
            if ctx is None:
                ctx = make_context(n, mode)
                if self.cache_dir:
                    path = os.path.join(self.cache_dir, cache_filename(ctx))
                    if os.path.exists(path):
                        load_cache(ctx, path)
                self.contexts[key] = ctx
        return ctx

    def save(self):
        if not self.cache_dir:
            return
        os.makedirs(self.cache_dir, exist_ok=True)
        for ctx in self.contexts.values():
            save_cache(ctx, os.path.join(self.cache_dir, cache_filename(ctx)))


def _cache_dir(flag: Optional[str]) -> Optional[str]:
    return os.environ.get("COHEN_CACHE_DIR") or flag


# -- cases ------------------------------------------------------------------------------

Case = Callable[[], object]


def _mode_label(mode) -> str:
    return "Z" if isinstance(mode, Integers) else f"Z/{mode.p}^{mode.r}"


def _identity_case(claim: str, params: dict, lhs, rhs, pool: ContextPool, n: int, mode) -> Case:
    def run():
        return verify_identity(lhs, rhs, pool.get(n, mode), claim, params)
    return run


def _modes(args, allow_z: bool = True) -> list:
    mod = ModPrimePower(args.p, args.r)
    if args.mode is None:
        return [Integers(), mod] if allow_z else [mod]
    if args.mode == "z":
        if not allow_z:
            raise UsageError(f"claim {args.claim} needs modular coefficients")
        return [Integers()]
    return [mod]


def _q_cases(which: str, n: int, args, pool: ContextPool) -> list:
    if n < 2 or n > 4:
        raise UsageError(f"{which} is supported for 2 <= n <= 4, got {n}")
    kmax = args.kmax
    if not 1 <= kmax <= 12:
        raise UsageError(f"--kmax must lie in 1..12, got {kmax}")
    rng = random.Random(args.seed)
    randoms = [random_expr(n, rng, depth=2) for _ in range(args.random_g)]
    cases = []
    for mode in _modes(args):
        for x in range(1, n + 1):
            gs = [W.full_product([j for j in range(1, n + 1) if j != x])] + randoms
            for g in gs:
                for k in range(1, kmax + 1):
                    params = {"n": n, "mode": _mode_label(mode), "x": x, "g": W.to_string(g), "k": k}
                    if which == "q1":
                        lhs, rhs = lhs_q1(x, g, k), rhs_q1(x, g, k)
                    else:
                        lhs, rhs = lhs_q2(g, x, k), rhs_q2(g, x, k)
                    cases.append(_identity_case(which, params, lhs, rhs, pool, n, mode))
    return cases


def _engel_cases(which: str, n: int, args, pool: ContextPool) -> list:
    if n < 1 or n > 4:
        raise UsageError(f"{which} is supported for 1 <= n <= 4, got {n}")
    ls = [args.l] if args.l is not None else list(range(1, n + 1))
    for l in ls:
        if not 1 <= l <= n:
            raise UsageError(f"need 1 <= l <= n, got l={l}")
    cases = []
    for mode in _modes(args, allow_z=True) if args.mode else [ModPrimePower(args.p, args.r)]:
        for l in ls:
            params = {"n": n, "l": l, "mode": _mode_label(mode)}
            if which == "engel":
                lhs, rhs = lhs_engel(n, l), rhs_engel_decomposition(n, l)
            else:
                lhs, rhs = rhs_engel_decomposition(n, l), rhs_shuffle_form(n, l)
            cases.append(_identity_case(which, params, lhs, rhs, pool, n + 1, mode))
        if which == "engel" and args.l is None:
            params = {"n": n, "l": n + 1, "mode": _mode_label(mode)}
            cases.append(_identity_case("engel-vanishing", params, lhs_engel(n, n + 1), W.IDENTITY,
                                        pool, n + 1, mode))
    return cases


def _pr_cases(n: int, args, pool: ContextPool) -> list:
    if n < 1 or n > 3:
        raise UsageError(f"pr is supported for 1 <= n <= 3, got {n}")
    if args.mode == "z":
        raise UsageError("claim pr needs modular coefficients")
    p, r = args.p, args.r
    if p ** r > 125:
        raise UsageError(f"p^r = {p ** r} exceeds 125")

    def valuation():
        t0 = time.perf_counter()
        bad = binomial_valuation_failures(p, r)
        ms = int(1000 * (time.perf_counter() - t0))
        return IdentityReport("pr-valuation", {"p": p, "r": r}, FALSIFIED if bad else VERIFIED,
                              elapsed_ms=ms, note=f"checked i = 1..{p ** r}",
                              witness={"failures": bad} if bad else None)

    mode = ModPrimePower(p, r)
    cases = [valuation]
    for m in range(1, n + 1):
        params = {"n": m, "p": p, "r": r}
        cases.append(_identity_case("pr", params, lhs_pr(m, p, r), power_recursion_pr(m, p, r),
                                    pool, m + 1, mode))
    return cases


def _lemma22_case(n: int) -> Case:
    def run():
        t0 = time.perf_counter()
        sums = lemma_sums(n)
        bad = {l: s["total"] for l, s in sums.items() if s["total"] != factorial(l) * stirling2(n, l)}
        ms = int(1000 * (time.perf_counter() - t0))
        note = "sum of d_l over S_n equals l! S(n,l) for every l" if not bad else "mismatch"
        return IdentityReport("lemma22", {"n": n}, FALSIFIED if bad else VERIFIED, elapsed_ms=ms, note=note,
                              witness={"failures": {str(l): v for l, v in bad.items()}} if bad else None)
    return run


def lemma23_reference(n: int, l: int, i: int) -> Optional[int]:
    """Closed form of the first-entry sum at ``i = 1`` and ``i = n``; else None."""
    if i == 1:
        return factorial(l - 1) * stirling2(n, l)
    if i == n:
        return factorial(l - 1) * stirling2(n - 1, l - 1)
    return None


def _lemma23_case(n: int) -> Case:
    def run():
        t0 = time.perf_counter()
        sums = lemma_sums(n)
        failures = []
        for l, s in sums.items():
            unit = factorial(l - 1)
            for i, total in s["by_first"].items():
                if total % unit:
                    failures.append({"l": l, "i": i, "sum": total, "reason": "not divisible"})
                ref = lemma23_reference(n, l, i)
                if ref is not None and ref != total:
                    failures.append({"l": l, "i": i, "sum": total, "expected": ref})
        ms = int(1000 * (time.perf_counter() - t0))
        return IdentityReport("lemma23", {"n": n}, FALSIFIED if failures else VERIFIED, elapsed_ms=ms,
                              note="(l-1)! divides every first-entry sum; closed forms at i=1 and i=n",
                              witness={"failures": failures} if failures else None)
    return run


def _consistency_cases(n: int, args, pool: ContextPool) -> list:
    if n < 1 or n > 4:
        raise UsageError(f"consistency is supported for 1 <= n <= 4, got {n}")
    cases = []
    for mode in _modes(args):
        def run(mode=mode):
            t0 = time.perf_counter()
            rep = consistency_check(pool.get(n, mode), trials=args.trials)
            ms = int(1000 * (time.perf_counter() - t0))
            return IdentityReport("consistency", {"n": n, "mode": _mode_label(mode)},
                                  VERIFIED if rep.passed else FALSIFIED, elapsed_ms=ms,
                                  note=json.dumps(rep.checks, sort_keys=True), witness=rep.witness)
        cases.append(run)
    return cases


_MEMBERSHIP = {"lemma25": "lemma25", "lemma26": "lemma26", "prop27-np2": "prop27_np2",
               "prop27-np1": "prop27_np1", "cor28": "cor28", "remark-r1": "remark_r1"}


def _membership_cases(claim: str, n: int, args, pool: ContextPool) -> list:
    if args.mode == "z":
        raise UsageError(f"claim {claim} needs modular coefficients")
    key = _MEMBERSHIP[claim]
    r = args.r
    if claim == "remark-r1" and (args.r_given is None or args.claim == "all"):
        r = 1
    if claim == "lemma25":
        ls = [args.l] if args.l is not None else [l for l in range(2, n + 1)]
        params_list = [{"n": n, "p": args.p, "r": r, "l": l} for l in ls]
    else:
        params_list = [{"n": n, "p": args.p, "r": r}]
    size = n + 1 if key in ("lemma25", "prop27_np2", "prop27_np1") else n
    cases = []
    for params in params_list:
        try:
            check_claim_params(key, n, args.p, r, params.get("l"))
        except ClaimRangeError as exc:
            raise UsageError(str(exc)) from exc

        def run(params=params):
            ctx = pool.get(size, ModPrimePower(args.p, r))
            return verify_claims(key, params, ctx)[0]
        cases.append(run)
    return cases


def build_cases(claim: str, n: Optional[int], args, pool: ContextPool) -> list:
    n = DEFAULT_N[claim] if n is None else n
    if claim in ("q1", "q2"):
        return _q_cases(claim, n, args, pool)
    if claim in ("engel", "shuffle"):
        return _engel_cases(claim, n, args, pool)
    if claim == "pr":
        return _pr_cases(n, args, pool)
    if claim == "lemma22":
        if not 1 <= n <= 10:
            raise UsageError(f"lemma22 is supported for 1 <= n <= 10, got {n}")
        return [_lemma22_case(n)]
    if claim == "lemma23":
        if not 1 <= n <= 10:
            raise UsageError(f"lemma23 is supported for 1 <= n <= 10, got {n}")
        return [_lemma23_case(n)]
    if claim == "consistency":
        return _consistency_cases(n, args, pool)
    return _membership_cases(claim, n, args, pool)


def _run_case(case: Case):
    return case()


def run_verify(args, pool: Optional[ContextPool] = None) -> RunManifest:
    """Run the selected claim(s); raises :class:`UsageError` on bad parameters."""
    pool = pool or ContextPool(_cache_dir(args.cache))
    if args.claim == "all":
        # every claim at its default profile; only p, r, mode and kmax carry over
        claims = [c for c in CLAIM_CHOICES if c != "all"]
        case_args = argparse.Namespace(**{**vars(args), "n": None, "l": None})
    else:
        claims, case_args = [args.claim], args
    cases = []
    for claim in claims:
        cases += build_cases(claim, case_args.n, case_args, pool)
    jobs = max(1, args.jobs)
    if jobs == 1:
        reports = [_run_case(c) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_run_case, cases))
    pool.save()
    context = {"claim": args.claim, "n": args.n, "p": args.p, "r": args.r, "mode": args.mode,
               "kmax": args.kmax, "l": args.l, "seed": args.seed, "random_g": args.random_g,
               "trials": args.trials}
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return RunManifest(__version__, stamp, context, reports)


# -- subcommands --------------------------------------------------------------------------

def cmd_collect(args) -> int:
    try:
        mode = parse_mode(args.mode, args.p, args.r)
        expr = W.parse(args.expr, args.n)
        pool = ContextPool(_cache_dir(args.cache))
        ctx = pool.get(args.n, mode)
        nf = collect(expr, ctx)
        pool.save()
    except (W.ParseError, ContextError, CacheMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_nf(nf, ctx))
    print(json.dumps(nf.to_json()))
    return 0


def cmd_verify(args) -> int:
    try:
        manifest = run_verify(args)
    except (UsageError, ClaimRangeError, CacheMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    doc = manifest.to_json()
    tally: dict = {}
    for rep in doc["reports"]:
        claim = rep.get("claim_id") or rep.get("claim")
        params = rep.get("parameters", rep.get("params"))
        if args.verbose or rep["status"] not in (VERIFIED, "Member"):
            print(f"{rep['status']:<12} {claim} {json.dumps(params, sort_keys=True)}")
        counts = tally.setdefault(claim, {})
        counts[rep["status"]] = counts.get(rep["status"], 0) + 1
    for claim, counts in tally.items():
        summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
        print(f"{claim:<16} {summary}")
    print(f"overall: {doc['overall']} ({len(doc['reports'])} cases)")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if doc["inconclusive"]:
        print(f"warning: {len(doc['inconclusive'])} inconclusive verdict(s)", file=sys.stderr)
    return 1 if doc["overall"] == "fail" else 0


def cmd_basis(args) -> int:
    if args.n < 1:
        print("error: n must be >= 1", file=sys.stderr)
        return 2
    ctx = GroupContext(args.n)
    for i, b in enumerate(ctx.basis):
        print(f"{i:>4}  w={b.weight}  {b}")
    print(f"size: {len(ctx.basis)}")
    return 0


def cmd_perm(args) -> int:
    n, l = args.n, args.l
    try:
        rows = perm_table(n, l, args.first)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for row in rows:
        print(f"{''.join(map(str, row.perm)) if n < 10 else ' '.join(map(str, row.perm))}  d_{l}={row.d}")
    total = sum(r.d for r in rows)
    print(f"sum: {total}")
    if args.first is None:
        print(f"reference l! S(n,l): {factorial(l) * stirling2(n, l)}")
    else:
        print(f"divisible by (l-1)! = {factorial(l - 1)}: {total % factorial(l - 1) == 0}")
        ref = lemma23_reference(n, l, args.first)
        if ref is not None:
            print(f"reference closed form: {ref}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cohen", description="Normal forms and identity checks in Cohen groups.")
    ap.add_argument("--version", action="version", version=f"cohen {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("collect", help="collect an expression to normal form")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--mode", choices=("z", "mod"), default="z")
    c.add_argument("--p", type=int, default=3)
    c.add_argument("--r", type=int, default=2)
    c.add_argument("--expr", required=True)
    c.add_argument("--cache", help="structure-constant cache directory")
    c.set_defaults(func=cmd_collect)

    v = sub.add_parser("verify", help="verify identities and membership claims")
    v.add_argument("--claim", choices=CLAIM_CHOICES, required=True)
    v.add_argument("--n", type=int)
    v.add_argument("--mode", choices=("z", "mod"))
    v.add_argument("--p", type=int, default=3)
    v.add_argument("--r", type=int, default=None)
    v.add_argument("--kmax", type=int, default=12)
    v.add_argument("--l", type=int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--random-g", dest="random_g", type=int, default=20,
                   help="random expressions g per generator in q1/q2")
    v.add_argument("--trials", type=int, default=500, help="randomized trials for consistency")
    v.add_argument("--json", help="write the run manifest here")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--verbose", action="store_true", help="print one line per case")
    v.add_argument("--cache", help="structure-constant cache directory")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("basis", help="print the ordered basis")
    b.add_argument("--n", type=int, required=True)
    b.set_defaults(func=cmd_basis)

    p = sub.add_parser("perm", help="tabulate d_l over permutations")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--first", type=int)
    p.set_defaults(func=cmd_perm)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "verify":
        args.r_given = args.r
        if args.r is None:
            args.r = 1 if args.claim == "remark-r1" else 2
        try:
            ModPrimePower(args.p, args.r)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
