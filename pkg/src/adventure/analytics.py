"""Learning-log features and the statistics used to compare the three modes.

Per-learner features are proportions of Correct / Wrong / MissingLogic
submissions plus the rate of requesting another exercise. Group comparison
uses one-way ANOVA (F, p, eta squared), pairwise mean differences, a pooled
two-sample t-test, Cronbach's alpha for questionnaire scales, and repeat /
refusal rates over the recommendation events.

p-values come from the regularized incomplete beta function evaluated with a
continued fraction, so no statistics library is required at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .events import EventRecord

# ---------------------------------------------------------------------------
# numeric kernel


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-14) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) to ~1e-12 relative accuracy for the parameter ranges used here."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be within [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - math.exp(b * math.log1p(-x) + a * math.log(x) - log_beta(b, a)) * _betacf(
        b, a, 1.0 - x
    ) / b


def f_sf(f_value: float, df1: int, df2: int) -> float:
    """Upper-tail probability of the F distribution."""
    if f_value <= 0.0:
        return 1.0
    if math.isinf(f_value):
        return 0.0
    x = df2 / (df2 + df1 * f_value)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


def t_sf_two_sided(t_value: float, df: int) -> float:
    """Two-sided p for Student's t via the t^2 ~ F(1, df) identity."""
    return f_sf(t_value * t_value, 1, df)


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _sample_var(xs: Sequence[float]) -> float:
    m = _mean(xs)
    return sum((x - m) ** 2 for x in xs) / (len(xs) - 1)


# ---------------------------------------------------------------------------
# group statistics


@dataclass(frozen=True)
class GroupStats:
    label: str
    n: int
    mean: float
    sd: float


@dataclass(frozen=True)
class AnovaResult:
    f: float
    df1: int
    df2: int
    p: float
    eta_squared: float
    note: Optional[str] = None


class InsufficientData(ValueError):
    pass


def describe_group(label: str, values: Sequence[float]) -> GroupStats:
    if not values:
        raise InsufficientData(f"group {label!r} is empty")
    sd = math.sqrt(_sample_var(values)) if len(values) > 1 else 0.0
    return GroupStats(label=label, n=len(values), mean=_mean(values), sd=sd)


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """Classic between/within decomposition with p from the F upper tail."""
    if len(groups) < 2:
        raise InsufficientData("ANOVA requires at least 2 groups")
    if any(len(g) < 2 for g in groups):
        raise InsufficientData("every group needs at least 2 observations")
    k = len(groups)
    n_total = sum(len(g) for g in groups)
    grand = sum(sum(g) for g in groups) / n_total
    ss_between = sum(len(g) * (_mean(g) - grand) ** 2 for g in groups)
    ss_within = sum(sum((x - _mean(g)) ** 2 for x in g) for g in groups)
    df1 = k - 1
    df2 = n_total - k
    ms_between = ss_between / df1
    ms_within = ss_within / df2
    if ms_within == 0.0:
        if ms_between == 0.0:
            return AnovaResult(
                f=0.0, df1=df1, df2=df2, p=1.0, eta_squared=0.0, note="zero variance everywhere"
            )
        return AnovaResult(
            f=math.inf,
            df1=df1,
            df2=df2,
            p=0.0,
            eta_squared=1.0,
            note="zero within-group variance",
        )
    f_value = ms_between / ms_within
    return AnovaResult(
        f=f_value,
        df1=df1,
        df2=df2,
        p=f_sf(f_value, df1, df2),
        eta_squared=eta_squared_from_f(f_value, df1, df2),
    )


def eta_squared_from_f(f_value: float, df1: int, df2: int) -> float:
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if f_value < 0:
        raise ValueError("F must be >= 0")
    if math.isinf(f_value):
        return 1.0
    return f_value * df1 / (f_value * df1 + df2)


@dataclass(frozen=True)
class MeanDiff:
    delta: float
    abs_delta: float
    direction: str


def pairwise_mean_diff(groups: Sequence[Sequence[float]], i: int, j: int, labels=None) -> MeanDiff:
    delta = _mean(groups[i]) - _mean(groups[j])
    if labels is None:
        labels = [f"group{idx}" for idx in range(len(groups))]
    if delta > 0:
        direction = f"{labels[i]} > {labels[j]}"
    elif delta < 0:
        direction = f"{labels[i]} < {labels[j]}"
    else:
        direction = f"{labels[i]} = {labels[j]}"
    return MeanDiff(delta=delta, abs_delta=abs(delta), direction=direction)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float


def two_sample_t(a: Sequence[float], b: Sequence[float], pooled: bool = True) -> TTestResult:
    """Pooled Student t; df = n_a + n_b - 2."""
    if len(a) < 2 or len(b) < 2:
        raise InsufficientData("each sample needs at least 2 observations")
    if not pooled:
        raise NotImplementedError("only the pooled form is provided")
    na, nb = len(a), len(b)
    df = na + nb - 2
    sp2 = ((na - 1) * _sample_var(a) + (nb - 1) * _sample_var(b)) / df
    if sp2 == 0.0:
        t_value = 0.0 if _mean(a) == _mean(b) else math.inf
    else:
        t_value = (_mean(a) - _mean(b)) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    p = 0.0 if math.isinf(t_value) else t_sf_two_sided(t_value, df)
    return TTestResult(t=t_value, df=df, p=p)


def cronbach_alpha(item_matrix: Sequence[Sequence[float]]) -> float:
    """alpha = k/(k-1) * (1 - sum(item variances) / variance(person totals)).

    Rows are persons, columns are items; sample variances throughout.
    """
    n_persons = len(item_matrix)
    if n_persons < 2:
        raise InsufficientData("need at least 2 persons")
    k = len(item_matrix[0])
    if k < 2:
        raise InsufficientData("need at least 2 items")
    if any(len(row) != k for row in item_matrix):
        raise ValueError("ragged item matrix")
    items = [[row[j] for row in item_matrix] for j in range(k)]
    totals = [sum(row) for row in item_matrix]
    total_var = _sample_var(totals)
    if total_var == 0.0:
        raise InsufficientData("zero variance of person totals")
    item_var_sum = sum(_sample_var(col) for col in items)
    return k / (k - 1) * (1.0 - item_var_sum / total_var)


# ---------------------------------------------------------------------------
# log features


@dataclass(frozen=True)
class LogFeatureVector:
    learner_id: str
    n_submissions: int
    p_correct: float
    p_wrong: float
    p_missing: float
    skip_count: int
    skip_rate: float
    counts: dict = field(default_factory=dict)
    low_data: bool = False


FEATURE_NAMES = ("p_correct", "p_wrong", "p_missing", "skip_rate")


def compute_log_features(events: Iterable[EventRecord], learner_id: str) -> LogFeatureVector:
    """The four per-learner features over that learner's submission/skip events."""
    counts = {"Correct": 0, "Wrong": 0, "MissingLogic": 0}
    skips = 0
    for event in events:
        if event.learner_id != learner_id:
            continue
        if event.type == "submission":
            counts[event.payload["classification"]] += 1
        elif event.type == "skip":
            skips += 1
    n = sum(counts.values())
    if n > 0:
        p_correct = counts["Correct"] / n
        p_wrong = counts["Wrong"] / n
        p_missing = counts["MissingLogic"] / n
    else:
        p_correct = p_wrong = p_missing = 0.0
    denominator = skips + n
    skip_rate = skips / denominator if denominator else 0.0
    return LogFeatureVector(
        learner_id=learner_id,
        n_submissions=n,
        p_correct=p_correct,
        p_wrong=p_wrong,
        p_missing=p_missing,
        skip_count=skips,
        skip_rate=skip_rate,
        counts=dict(counts),
        low_data=n == 0,
    )


@dataclass(frozen=True)
class RecommendationRates:
    repeat_rate: Optional[float]
    refusal_rate: Optional[float]
    n_genai_recommendations: int
    n_decisions_with_genai_option: int
    undefined: bool = False


_GENAI_CHOICES = {"accept_genai", "repeat_genai"}
_REFUSAL_CHOICES = {"use_adaptive", "decline_adaptive"}


def repeat_and_refusal_rates(
    events: Iterable[EventRecord], learners: set[str]
) -> RecommendationRates:
    """Share of repeated GenAI recommendations, and of decisions that refused GenAI."""
    recs = 0
    repeated = 0
    decisions = 0
    refusals = 0
    for event in events:
        if event.learner_id not in learners:
            continue
        if event.type == "recommendation_shown" and event.payload.get("source") == "genai":
            recs += 1
            if event.payload.get("repeated"):
                repeated += 1
        elif event.type == "recommendation_decision":
            offered = set(event.payload.get("offered", []))
            if offered & _GENAI_CHOICES:
                decisions += 1
                if event.payload.get("chosen") in _REFUSAL_CHOICES:
                    refusals += 1
    return RecommendationRates(
        repeat_rate=repeated / recs if recs else None,
        refusal_rate=refusals / decisions if decisions else None,
        n_genai_recommendations=recs,
        n_decisions_with_genai_option=decisions,
        undefined=recs == 0 or decisions == 0,
    )


@dataclass(frozen=True)
class LikertSummary:
    stats: Optional[GroupStats]
    histogram: dict[int, int]
    n_skipped: int


def likert_summary(events: Iterable[EventRecord], learners: set[str], label: str) -> LikertSummary:
    """Agreement ratings 1..5 (the 0 skip sentinel is excluded)."""
    histogram = {level: 0 for level in range(1, 6)}
    values = []
    skipped = 0
    for event in events:
        if event.learner_id not in learners or event.type != "agreement":
            continue
        rating = event.payload["rating"]
        if rating == 0:
            skipped += 1
            continue
        histogram[rating] += 1
        values.append(float(rating))
    stats = describe_group(label, values) if values else None
    return LikertSummary(stats=stats, histogram=histogram, n_skipped=skipped)


# ---------------------------------------------------------------------------
# report


def report(events: Sequence[EventRecord], group_of: dict[str, str]) -> dict:
    """Structured comparison document: per-group feature stats, ANOVA rows, rates.

    Deterministic: groups and learners are processed in sorted order.
    """
    groups: dict[str, list[str]] = {}
    for learner, label in group_of.items():
        groups.setdefault(label, []).append(learner)
    group_labels = sorted(groups)
    for label in group_labels:
        groups[label].sort()

    features_by_learner = {
        learner: compute_log_features(events, learner) for learner in sorted(group_of)
    }

    feature_rows = []
    for feature in FEATURE_NAMES:
        per_group = []
        for label in group_labels:
            values = [getattr(features_by_learner[l], feature) for l in groups[label]]
            per_group.append(values)
        row: dict = {"feature": feature, "groups": {}}
        for label, values in zip(group_labels, per_group):
            if values:
                stats = describe_group(label, values)
                row["groups"][label] = {"n": stats.n, "mean": stats.mean, "sd": stats.sd}
            else:
                row["groups"][label] = {"n": 0, "mean": None, "sd": None}
        if len(per_group) >= 2 and all(len(v) >= 2 for v in per_group):
            anova = one_way_anova(per_group)
            row["anova"] = {
                "F": anova.f,
                "df1": anova.df1,
                "df2": anova.df2,
                "p": anova.p,
                "eta_squared": anova.eta_squared,
                "note": anova.note,
            }
            diffs = {}
            for i in range(len(group_labels)):
                for j in range(i + 1, len(group_labels)):
                    diff = pairwise_mean_diff(per_group, i, j, labels=group_labels)
                    diffs[f"{group_labels[i]} vs {group_labels[j]}"] = {
                        "delta": diff.delta,
                        "abs_delta": diff.abs_delta,
                        "direction": diff.direction,
                    }
            row["pairwise"] = diffs
            row["pairwise_note"] = "descriptive mean differences; no post hoc correction applied"
        else:
            row["anova"] = None
            row["pairwise"] = {}
        feature_rows.append(row)

    rates = {}
    likert = {}
    for label in group_labels:
        learners = set(groups[label])
        r = repeat_and_refusal_rates(events, learners)
        rates[label] = {
            "repeat_rate": r.repeat_rate,
            "refusal_rate": r.refusal_rate,
            "n_genai_recommendations": r.n_genai_recommendations,
            "n_decisions_with_genai_option": r.n_decisions_with_genai_option,
            "undefined": r.undefined,
        }
        summary = likert_summary(events, learners, label)
        likert[label] = {
            "n": summary.stats.n if summary.stats else 0,
            "mean": summary.stats.mean if summary.stats else None,
            "sd": summary.stats.sd if summary.stats else None,
            "histogram": {str(k): v for k, v in sorted(summary.histogram.items())},
            "n_skipped": summary.n_skipped,
        }

    return {
        "groups": {label: groups[label] for label in group_labels},
        "learners": {
            learner: {
                "group": group_of[learner],
                "n_submissions": fv.n_submissions,
                "p_correct": fv.p_correct,
                "p_wrong": fv.p_wrong,
                "p_missing": fv.p_missing,
                "skip_count": fv.skip_count,
                "skip_rate": fv.skip_rate,
                "counts": fv.counts,
                "low_data": fv.low_data,
            }
            for learner, fv in features_by_learner.items()
        },
        "features": feature_rows,
        "recommendation_rates": rates,
        "agreement": likert,
    }


def _fmt(value, digits: int = 4) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.{digits}f}"
    return str(value)


def render_text_tables(doc: dict) -> str:
    """Plain-text tables for terminals; derived entirely from the JSON document."""
    lines = []
    group_labels = sorted(doc["groups"])
    lines.append("Per-feature group comparison")
    header = ["feature"] + [f"{g} mean (sd)" for g in group_labels] + ["F", "df", "p", "eta^2"]
    lines.append(" | ".join(header))
    for row in doc["features"]:
        cells = [row["feature"]]
        for label in group_labels:
            stats = row["groups"][label]
            cells.append(f"{_fmt(stats['mean'])} ({_fmt(stats['sd'])})")
        anova = row["anova"]
        if anova:
            cells.extend(
                [
                    _fmt(anova["F"], 3),
                    f"({anova['df1']}, {anova['df2']})",
                    _fmt(anova["p"], 4),
                    _fmt(anova["eta_squared"], 3),
                ]
            )
        else:
            cells.extend(["-", "-", "-", "-"])
        lines.append(" | ".join(cells))

    lines.append("")
    lines.append("Recommendation rates")
    lines.append("group | repeat_rate | refusal_rate | n_recs | n_decisions")
    for label in group_labels:
        r = doc["recommendation_rates"][label]
        lines.append(
            " | ".join(
                [
                    label,
                    _fmt(r["repeat_rate"]),
                    _fmt(r["refusal_rate"]),
                    str(r["n_genai_recommendations"]),
                    str(r["n_decisions_with_genai_option"]),
                ]
            )
        )

    lines.append("")
    lines.append("Feedback agreement (1-5)")
    lines.append("group | n | mean | sd | 1 | 2 | 3 | 4 | 5 | skipped")
    for label in group_labels:
        a = doc["agreement"][label]
        hist = a["histogram"]
        lines.append(
            " | ".join(
                [
                    label,
                    str(a["n"]),
                    _fmt(a["mean"], 3),
                    _fmt(a["sd"], 3),
                    *(str(hist[str(level)]) for level in range(1, 6)),
                    str(a["n_skipped"]),
                ]
            )
        )
    return "\n".join(lines)
