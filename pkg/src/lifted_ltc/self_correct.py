"""Iterative self-correction on a lifted code, with exact per-round metrics.

One round replaces ``w`` by the plurality decode of the ensemble of nearest
local codewords ``f_s``.  The loop stops when the tester never rejects
(``fail-zero``), when the rejection probability does not strictly drop
(``stall``), or at the round cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .agreement import AgreementGraph, LocalEnsemble, agreement_value, distance_to_global, plurality_global
from .field import Word, word_distance
from .tanner import LiftedCodeFamily

FAIL_ZERO = "fail-zero"
ROUND_CAP = "round-cap"
STALL = "stall"


def _as_word(family: LiftedCodeFamily, w) -> Word:
    if isinstance(w, Word):
        family.global_values(w)
        return w
    return Word.from_array(family.system.V, family.global_values(w), family.p)


def build_ensemble(family: LiftedCodeFamily, w) -> LocalEnsemble:
    """``f_s`` = nearest codeword of ``C_s`` to ``w|_s`` (lexicographic tie-break) for every weighted ``s``."""
    w = _as_word(family, w)
    funcs = {}
    for s, ps in family.system.s_marginal.items():
        if not ps:
            continue
        code = family.lift(("S", s))
        local = w.restrict(family.system.S[s])
        funcs[s], _ = code.nearest_codeword(local, family.budget)
    return LocalEnsemble(funcs)


@dataclass
class CorrectionRound:
    index: int
    input_word: Word
    ensemble: LocalEnsemble = field(repr=False)
    agreement: Fraction
    output_word: Word
    fail_in: Fraction
    fail_out: Fraction
    distance: Fraction
    k_distance: Fraction

    def metrics(self) -> dict[str, Fraction]:
        return {
            "agreement": self.agreement,
            "fail_in": self.fail_in,
            "fail_out": self.fail_out,
            "distance": self.distance,
            "k_distance": self.k_distance,
        }


@dataclass
class CorrectionTrace:
    rounds: list[CorrectionRound]
    terminal: Word
    reason: str

    @property
    def total_distance(self) -> Fraction:
        return sum((r.distance for r in self.rounds), Fraction(0))

    @property
    def initial_fail(self) -> Fraction:
        return self.rounds[0].fail_in

    @property
    def corrected(self) -> bool:
        return self.reason == FAIL_ZERO


def correction_round(family: LiftedCodeFamily, A: AgreementGraph, w, index: int = 0) -> CorrectionRound:
    """One ensemble-and-decode step; measures, never asserts."""
    w = _as_word(family, w)
    E = build_ensemble(family, w)
    a = agreement_value(A, E)
    w_next = plurality_global(family.system, A, E)
    return CorrectionRound(
        index=index,
        input_word=w,
        ensemble=E,
        agreement=a,
        output_word=w_next,
        fail_in=family.fail_probability(w),
        fail_out=family.fail_probability(w_next),
        distance=word_distance(w, w_next),
        k_distance=distance_to_global(A, E, w_next, "K"),
    )


def iterative_self_correct(family: LiftedCodeFamily, A: AgreementGraph, w0, round_cap: int | None = None
                           ) -> CorrectionTrace:
    """Repeat :func:`correction_round` until fail-zero, stall or the round cap.

    The default cap is ``ceil(log2(1 / min_t P(t))) + 1``.
    """
    if round_cap is None:
        round_cap = family.default_round_cap()
    if round_cap < 1:
        raise ValueError("round_cap must be >= 1")
    w = _as_word(family, w0)
    rounds: list[CorrectionRound] = []
    reason = ROUND_CAP
    for i in range(round_cap):
        r = correction_round(family, A, w, i)
        rounds.append(r)
        w = r.output_word
        if r.fail_out == 0:
            reason = FAIL_ZERO
            break
        if r.fail_out >= r.fail_in:
            reason = STALL
            break
    return CorrectionTrace(rounds, w, reason)


@dataclass
class HypothesisAudit:
    rho: Fraction
    delta: Fraction
    lam: Fraction
    alpha: Fraction
    threshold: Fraction
    testability: Fraction
    hypothesis_met: bool
    degenerate: bool
    exact: dict[str, bool]
    notes: list[str]

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "delta": self.delta,
            "lambda": self.lam,
            "alpha": self.alpha,
            "lambda_threshold": self.threshold,
            "implied_testability": self.testability,
            "hypothesis_met": self.hypothesis_met,
            "degenerate": self.degenerate,
            "exact": dict(self.exact),
            "notes": list(self.notes),
        }


def hypothesis_audit(family: LiftedCodeFamily | None, A: AgreementGraph | None, measured: dict,
                     grassmann: tuple[int, int] | None = None) -> HypothesisAudit:
    """Check ``lambda <= rho*delta*alpha/64`` and report ``rho*delta*alpha/16``.

    ``measured`` holds ``rho``, ``delta``, ``lambda``, ``alpha`` and
    optionally ``exact``, a mapping from those names to whether the value
    is exact or empirical.  ``grassmann=(q1, q2)`` adds the regime check
    ``q2 >= 3 q1 + 2``.
    """
    rho = Fraction(measured["rho"]) if measured.get("rho") is not None else Fraction(0)
    delta = Fraction(measured["delta"]) if measured.get("delta") is not None else Fraction(0)
    lam = Fraction(measured["lambda"])
    alpha = Fraction(measured["alpha"]) if measured.get("alpha") is not None else Fraction(0)
    exact = {k: bool(measured.get("exact", {}).get(k, False)) for k in ("rho", "delta", "lambda", "alpha")}
    notes = []
    degenerate = delta == 0
    if degenerate:
        notes.append("local distance is 0: local codes are trivial")
    if rho <= 0:
        notes.append("no positive testability estimate")
    if alpha <= 0:
        notes.append("no positive soundness estimate")
    threshold = rho * delta * alpha / 64
    met = (not degenerate) and rho > 0 and alpha > 0 and lam <= threshold
    if not met:
        notes.append("hypothesis unmet: the theorem's guarantee is not claimed")
    if grassmann is not None:
        q1, q2 = grassmann
        if q2 < 3 * q1 + 2:
            notes.append(f"Grassmannian regime q2 >= 3*q1 + 2 not met (q1={q1}, q2={q2})")
    return HypothesisAudit(rho, delta, lam, alpha, threshold, rho * delta * alpha / 16, met, degenerate, exact, notes)


def claim_checks(trace: CorrectionTrace, audit: HypothesisAudit) -> dict[str, bool | None]:
    """Evaluate the per-round inequalities of the correction argument on a trace.

    Entries are ``None`` when the bound is undefined (a zero denominator).
    """
    rho, delta, alpha = audit.rho, audit.delta, audit.alpha
    first = trace.rounds[0]
    eps = first.fail_in
    out: dict[str, bool | None] = {}
    if rho and delta:
        out["agreement"] = all(1 - r.agreement <= 4 * r.fail_in / (rho * delta) for r in trace.rounds)
    else:
        out["agreement"] = None
    if rho and delta and alpha:
        out["step_distance"] = all(r.distance <= 8 * r.fail_in / (rho * delta * alpha) for r in trace.rounds)
        out["total_distance"] = trace.total_distance <= 16 * eps / (rho * delta * alpha)
    else:
        out["step_distance"] = out["total_distance"] = None
    out["halving"] = all(r.fail_out <= r.fail_in / 2 for r in trace.rounds)
    out["first_halving"] = first.fail_out <= first.fail_in / 2
    return out
