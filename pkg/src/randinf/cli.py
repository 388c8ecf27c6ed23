"""Command-line front end.

Subcommands: probs, assign, analyze, check, oracle, simulate, factorial.
Every command is a pure function of (config, input files, seed) and emits
JSON with sorted keys and 17-significant-digit floats, so outputs are
byte-identical across runs.

Exit codes: 0 success, 2 configuration error, 3 precondition refusal
(vanishing second-order assignment probabilities), 4 oracle battery failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib  # python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import estimation, oracle, qframework, simulation
from .assignment import (
    CompletelyRandomized,
    Partition,
    SplitPlot,
    Stratified,
    SupportTooLargeError,
    Unicluster,
    load_custom_support_csv,
)
from .estimation import HT, ObservedOutcomes
from .population import (
    Contrast,
    FactorialStructure,
    PotentialOutcomesTable,
    factorial_contrast,
    load_population_csv,
    unit_contrasts,
)
from .qframework import (
    QMatrix,
    SAPViolationError,
    q_half,
    q_strat,
    q_strict,
    q_wholeplot,
    sap_witness,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REFUSAL = 3
EXIT_ORACLE = 4

ROMAN_MODELS = ("I", "II", "III", "IV", "V", "VI")


class ConfigError(ValueError):
    """Bad configuration or input file."""


# -- deterministic JSON ---------------------------------------------------------


def render_json(value, indent: int = 2) -> str:
    """JSON with sorted keys and 17-significant-digit floats."""

    def render(v, depth: int) -> str:
        pad = " " * (indent * depth)
        inner = " " * (indent * (depth + 1))
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            f = float(v)
            if not math.isfinite(f):
                raise ValueError("cannot serialize non-finite float")
            return format(f, ".17g")
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, Fraction):
            if v.denominator == 1:
                return json.dumps(str(v.numerator))
            return json.dumps(f"{v.numerator}/{v.denominator}")
        if isinstance(v, dict):
            if not v:
                return "{}"
            keys = sorted(v, key=str)
            parts = [f"{inner}{json.dumps(str(k))}: {render(v[k], depth + 1)}" for k in keys]
            return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
        if isinstance(v, (list, tuple, np.ndarray)):
            items = list(v)
            if not items:
                return "[]"
            parts = [f"{inner}{render(item, depth + 1)}" for item in items]
            return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
        raise ValueError(f"cannot serialize {type(v).__name__}")

    return render(value, 0) + "\n"


def _emit(payload, out: str | None) -> None:
    text = render_json(payload)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- configuration --------------------------------------------------------------


def load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    data = p.read_bytes()
    if p.suffix.lower() == ".json":
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    try:
        return tomllib.loads(data.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: invalid TOML ({exc})") from None


def _resolve(path, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def build_table(config: dict, base: Path) -> PotentialOutcomesTable:
    try:
        pop = config["population"]
    except KeyError:
        raise ConfigError("config is missing the 'population' file path") from None
    path = _resolve(pop, base)
    if not path.exists():
        raise ConfigError(f"population file {path} does not exist")
    try:
        return load_population_csv(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _counts_for(table: PotentialOutcomesTable, raw: dict, where: str) -> dict[str, int]:
    if set(raw) != set(table.treatments):
        raise ConfigError(
            f"{where} must give one count per treatment {sorted(table.treatments)}, "
            f"got {sorted(map(str, raw))}"
        )
    return {z: int(raw[z]) for z in table.treatments}


def build_mechanism(config: dict, table: PotentialOutcomesTable, base: Path):
    mech_cfg = config.get("mechanism")
    if not isinstance(mech_cfg, dict) or "type" not in mech_cfg:
        raise ConfigError("config needs a [mechanism] block with a 'type'")
    kind = mech_cfg["type"]
    try:
        if kind == "completely_randomized":
            return CompletelyRandomized(table.units, _counts_for(table, mech_cfg["r"], "mechanism.r"))
        if kind == "stratified":
            if table.stratum_of is None:
                raise ConfigError("stratified mechanism needs stratum labels in the population CSV")
            labels = table.stratum_labels
            raw = mech_cfg["r"]
            if set(raw) != set(labels):
                raise ConfigError(
                    f"mechanism.r must give a block per stratum {sorted(map(str, labels))}"
                )
            r = {h: _counts_for(table, raw[h], f"mechanism.r.{h}") for h in labels}
            return Stratified.from_table(table, r)
        if kind == "split_plot":
            mech = SplitPlot.from_table(table, mech_cfg["r1"], mech_cfg["r2"])
            if set(mech.treatments) != set(table.treatments):
                raise ConfigError(
                    f"split-plot labels {sorted(mech.treatments)} do not match the "
                    f"population treatments {sorted(table.treatments)}"
                )
            return mech
        if kind == "unicluster":
            if table.cluster_of is None:
                raise ConfigError("unicluster mechanism needs cluster labels in the population CSV")
            return Unicluster.from_table(table)
        if kind == "custom":
            path = _resolve(mech_cfg["support"], base)
            if not path.exists():
                raise ConfigError(f"support file {path} does not exist")
            mech = load_custom_support_csv(path, treatments=table.treatments)
            if mech.units != table.units:
                raise ConfigError(
                    "support CSV must list unit columns in the population row order"
                )
            return mech
    except KeyError as exc:
        raise ConfigError(f"mechanism config is missing {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown mechanism type {kind!r}")


def build_contrast(config: dict, table: PotentialOutcomesTable) -> Contrast:
    c_cfg = config.get("contrast")
    if not isinstance(c_cfg, dict):
        raise ConfigError("config needs a [contrast] block")
    has_g = "g" in c_cfg
    has_f = "factorial" in c_cfg
    if has_g == has_f:
        raise ConfigError("give exactly one contrast source: contrast.g or contrast.factorial")
    try:
        if has_g:
            unknown = set(c_cfg["g"]) - set(table.treatments)
            if unknown:
                raise ConfigError(
                    f"contrast references treatments {sorted(unknown)} not in the population"
                )
            return Contrast(c_cfg["g"])
        f = c_cfg["factorial"]
        fs = FactorialStructure(
            tuple(f["levels"]),
            tuple(f["effect"]),
            tuple(tuple(v) for v in f["vectors"]) if "vectors" in f else None,
        )
        if fs.n_treatments != len(table.treatments):
            raise ConfigError(
                f"factorial structure implies {fs.n_treatments} treatments, population "
                f"has {len(table.treatments)}"
            )
        return factorial_contrast(fs, treatments=table.treatments)
    except KeyError as exc:
        raise ConfigError(f"contrast config is missing {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_q_csv(path) -> QMatrix:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    try:
        matrix = [[float(cell) for cell in row] for row in rows]
        return QMatrix(matrix, name="file")
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_q(
    config: dict,
    table: PotentialOutcomesTable,
    mech,
    base: Path,
    choice: str | None = None,
    q_file: str | None = None,
) -> QMatrix:
    q_cfg = config.get("q", {})
    choice = choice or q_cfg.get("choice", "strict")
    n = table.n_units
    try:
        if choice == "strict":
            return q_strict(n)
        if choice == "strat":
            if table.stratum_of is None:
                raise ConfigError("q choice 'strat' needs stratum labels in the population CSV")
            return q_strat(table.stratum_sizes)
        if choice == "wholeplot":
            if table.wholeplot_of is not None:
                h = table.wholeplot_count
                return q_wholeplot(h, n // h)
            if isinstance(mech, SplitPlot):
                return q_wholeplot(mech.n_wholeplots, mech.wholeplot_size)
            raise ConfigError(
                "q choice 'wholeplot' needs whole-plot labels or a split-plot mechanism"
            )
        if choice == "half":
            if n % 2:
                raise ConfigError("q choice 'half' needs an even number of units")
            return q_half(n // 2)
        if choice == "file":
            path = q_file or q_cfg.get("file")
            if not path:
                raise ConfigError("q choice 'file' needs q.file or --q-file")
            path = _resolve(path, base)
            if not path.exists():
                raise ConfigError(f"Q matrix file {path} does not exist")
            return load_q_csv(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown q choice {choice!r}")


def load_partition_csv(path, table: PotentialOutcomesTable) -> Partition:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["unit", "arm"]:
        raise ConfigError(f"{path}: partition CSV must have header 'unit,arm'")
    arm_of = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise ConfigError(f"{path} line {lineno}: expected 'unit,arm'")
        arm_of[row[0].strip()] = row[1].strip()
    if set(arm_of) != set(table.units):
        raise ConfigError(f"{path}: partition must assign exactly the population units")
    try:
        return Partition(table.units, tuple(arm_of[u] for u in table.units))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_observed_csv(path, partition: Partition) -> ObservedOutcomes:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["unit", "outcome"]:
        raise ConfigError(f"{path}: observed CSV must have header 'unit,outcome'")
    values = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise ConfigError(f"{path} line {lineno}: expected 'unit,outcome'")
        try:
            values[row[0].strip()] = float(row[1])
        except ValueError:
            raise ConfigError(f"{path} line {lineno}: non-numeric outcome") from None
    missing = set(partition.units) - set(values)
    extra = set(values) - set(partition.units)
    if missing:
        raise ConfigError(f"observed file is missing outcomes for units {sorted(missing)}")
    if extra:
        raise ConfigError(f"observed file has outcomes for unknown units {sorted(extra)}")
    return ObservedOutcomes(partition, values)


# -- subcommands ------------------------------------------------------------------


def cmd_probs(args) -> int:
    config = load_config(args.config)
    base = Path(args.config).parent
    table = build_table(config, base)
    mech = build_mechanism(config, table, base)
    first = {}
    for u in mech.units:
        first[str(u)] = {}
        for z in mech.treatments:
            exact = mech.first_order_exact(u, z)
            first[str(u)][z] = {"value": float(exact), "exact": exact}
    def pair_rows():
        for i, ui in enumerate(mech.units):
            for uj in mech.units[i + 1 :]:
                for z in mech.treatments:
                    for zstar in mech.treatments:
                        exact = mech.second_order_exact(ui, uj, z, zstar)
                        yield {
                            "unit_i": str(ui),
                            "unit_j": str(uj),
                            "z": z,
                            "z_star": zstar,
                            "value": float(exact),
                            "exact": exact,
                        }

    rows = pair_rows()
    pairs = list(itertools.islice(rows, args.max_pairs))
    truncated = next(rows, None) is not None
    payload = {
        "units": [str(u) for u in mech.units],
        "treatments": list(mech.treatments),
        "first_order": first,
        "second_order": pairs,
        "second_order_truncated": truncated,
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_assign(args) -> int:
    config = load_config(args.config)
    base = Path(args.config).parent
    table = build_table(config, base)
    mech = build_mechanism(config, table, base)
    partition = mech.sample(args.seed)
    if args.partition_out:
        with open(args.partition_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["unit", "arm"])
            for u, a in zip(partition.units, partition.arms):
                writer.writerow([u, a])
    payload = {
        "seed": args.seed,
        "assignment": {str(u): a for u, a in zip(partition.units, partition.arms)},
    }
    _emit(payload, args.out)
    return EXIT_OK


def _report_payload(report: qframework.VarianceReport, extra: dict | None = None) -> dict:
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    return payload


def cmd_analyze(args) -> int:
    config = load_config(args.config)
    base = Path(args.config).parent
    table = build_table(config, base)
    mech = build_mechanism(config, table, base)
    c = build_contrast(config, table)
    q = build_q(config, table, mech, base, choice=args.q, q_file=args.q_file)
    partition = load_partition_csv(args.partition, table)
    try:
        partition.validate_against(mech.treatments)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    obs = load_observed_csv(args.observed, partition)
    ga_tol = args.tol_ga if args.tol_ga is not None else config.get("tolerances", {}).get("ga", 1e-9)

    witness = sap_witness(q, mech, c)
    if witness is not None:
        err = SAPViolationError(witness)
        sys.stderr.write(
            render_json(
                {
                    "error": str(err),
                    "witness": {
                        "unit_i": str(witness[0]),
                        "unit_j": str(witness[1]),
                        "z": witness[2],
                        "z_star": witness[3],
                    },
                }
            )
        )
        return EXIT_REFUSAL

    means = {z: estimation.lue_mean_from_observed(obs, mech, HT, z) for z in mech.treatments}
    tau_hat = estimation.contrast_estimate(c, means)
    vhat = qframework.v_q_hat_from_observed(obs, mech, HT, c, q)
    resid = qframework.ga_residual(q, table)
    report = qframework.VarianceReport(
        var=estimation.sampling_variance(table, mech, HT, c),
        v_q=qframework.v_q(table, mech, HT, c, q),
        bias=qframework.bias(q, unit_contrasts(table, c)),
        v_q_hat=vhat,
        tau_hat=tau_hat,
        sap_ok=True,
        ga_ok=resid <= ga_tol,
        ga_residual=resid,
        sap_witness=None,
    )
    _emit(_report_payload(report, {"mean_estimates": means, "ga_tolerance": ga_tol}), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    config = load_config(args.config)
    base = Path(args.config).parent
    table = build_table(config, base)
    mech = build_mechanism(config, table, base)
    c = build_contrast(config, table)
    q = build_q(config, table, mech, base, choice=args.q, q_file=args.q_file)
    ga_tol = args.tol_ga if args.tol_ga is not None else config.get("tolerances", {}).get("ga", 1e-9)
    partition = load_partition_csv(args.partition, table) if args.partition else None
    report = qframework.variance_report(table, mech, HT, c, q, partition=partition, ga_tol=ga_tol)
    extra = {
        "q_choice": q.name,
        "ga_tolerance": ga_tol,
        "positivity_ok": mech.positivity_ok(),
        "point_estimate_only": mech.point_estimate_only(),
        "scenario": qframework.bias_scenario_table(table, c, q, ga_tol=ga_tol),
    }
    _emit(_report_payload(report, extra), args.out)
    return EXIT_OK


# -- oracle batteries -------------------------------------------------------------


def _battery_rows(name, table, mech, contrasts, q_candidates, cap) -> list[dict]:
    rows = []

    def add(check, residual, tol):
        rows.append(
            {
                "battery": name,
                "check": check,
                "residual": float(residual),
                "tolerance": tol,
                "pass": bool(residual <= tol),
            }
        )

    c1 = contrasts[0]
    for idx, c in enumerate(contrasts):
        add(f"unbiasedness[c{idx}]", oracle.verify_unbiasedness(table, mech, HT, c, cap), 1e-10)
        add(f"variance[c{idx}]", oracle.verify_variance(table, mech, HT, c, cap), 1e-10)
    var = estimation.sampling_variance(table, mech, HT, c1)
    tau = unit_contrasts(table, c1)
    for qname, q in q_candidates:
        if qframework.sap_condition(q, mech, c1):
            r_bound, _ = oracle.verify_vq_estimator(table, mech, HT, c1, q, cap)
            add(f"vq_estimator_unbiased[{qname}]", r_bound, 1e-10)
            vq_val = qframework.v_q(table, mech, HT, c1, q)
            b = qframework.bias(q, tau)
            add(
                f"decomposition_identity[{qname}]",
                abs(var - (vq_val - b)) / max(1.0, abs(var), abs(vq_val)),
                1e-10,
            )
        else:
            add(f"sap_refusal[{qname}]", 0.0, 1.0)
    if len(contrasts) > 1:
        for qname, q in q_candidates:
            if qframework.sap_condition(q, mech, contrasts[0]) and qframework.sap_condition(
                q, mech, contrasts[1]
            ):
                res = oracle.verify_covariance(table, mech, HT, contrasts[0], contrasts[1], q, cap)
                add(f"covariance[{qname}]", res.covariance_vs_enumeration, 1e-10)
                add(f"cq_estimator_unbiased[{qname}]", res.estimator_vs_bound, 1e-10)
                break
    return rows


def _battery_table(seed: int, n: int, treatments, stratum_sizes=None) -> PotentialOutcomesTable:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    y = np.round(rng.standard_normal((n, len(treatments))) * 2.0 + 5.0, 6)
    units = [f"u{i+1}" for i in range(n)]
    stratum_of = None
    if stratum_sizes:
        stratum_of = {}
        pos = 0
        for h, size in enumerate(stratum_sizes, start=1):
            for i in range(pos, pos + size):
                stratum_of[units[i]] = str(h)
            pos += size
    return PotentialOutcomesTable(units, treatments, y, stratum_of=stratum_of)


def run_battery(name: str, cap: int = 10**6) -> list[dict]:
    if name == "cr4":
        table = _battery_table(1001, 4, ("0", "1"))
        mech = CompletelyRandomized(table.units, {"0": 2, "1": 2})
        contrasts = [Contrast({"0": -1.0, "1": 1.0}), Contrast({"0": 2.0, "1": -2.0})]
        qs = [("strict", q_strict(4)), ("half", q_half(2))]
        return _battery_rows(name, table, mech, contrasts, qs, cap)
    if name == "strat6":
        table = _battery_table(1002, 6, ("0", "1"), stratum_sizes=(3, 3))
        mech = Stratified.from_table(table, {"1": {"0": 2, "1": 1}, "2": {"0": 1, "1": 2}})
        contrasts = [Contrast({"0": -1.0, "1": 1.0})]
        qs = [("strict", q_strict(6)), ("strat", q_strat((3, 3))), ("half", q_half(3))]
        return _battery_rows(name, table, mech, contrasts, qs, cap)
    if name == "splitplot12":
        treatments = ("00", "01", "10", "11")
        table = _battery_table(1003, 12, treatments)
        mech = SplitPlot(table.units, {"0": 2, "1": 2}, {"0": 1, "1": 2})
        contrasts = [
            Contrast({"00": 1.0, "01": -1.0, "10": -1.0, "11": 1.0}),
            Contrast({"00": -1.0, "01": -1.0, "10": 1.0, "11": 1.0}),
        ]
        qs = [("wholeplot", q_wholeplot(4, 3)), ("strict", q_strict(12))]
        return _battery_rows(name, table, mech, contrasts, qs, cap)
    if name == "unicluster6":
        table = _battery_table(1004, 6, ("0", "1", "2"))
        clusters = [table.units[0:2], table.units[2:4], table.units[4:6]]
        mech = Unicluster(clusters, table.treatments)
        c = Contrast({"0": 1.0, "1": -2.0, "2": 1.0})
        rows = []
        unbiased = float(oracle.verify_unbiasedness(table, mech, HT, c, cap))
        variance = float(oracle.verify_variance(table, mech, HT, c, cap))
        rows.append(
            {
                "battery": name,
                "check": "unbiasedness",
                "residual": unbiased,
                "tolerance": 1e-10,
                "pass": unbiased <= 1e-10,
            }
        )
        rows.append(
            {
                "battery": name,
                "check": "variance",
                "residual": variance,
                "tolerance": 1e-10,
                "pass": variance <= 1e-10,
            }
        )
        rows.append(
            {
                "battery": name,
                "check": "minimax_none_admissible",
                "residual": 0.0 if qframework.minimax_q(mech) is None else 1.0,
                "tolerance": 0.5,
                "pass": qframework.minimax_q(mech) is None,
            }
        )
        for qname, q in (("strict", q_strict(6)), ("strat", q_strat((2, 2, 2)))):
            refused = not qframework.sap_condition(q, mech, c)
            rows.append(
                {
                    "battery": name,
                    "check": f"vq_hat_refusal[{qname}]",
                    "residual": 0.0 if refused else 1.0,
                    "tolerance": 0.5,
                    "pass": refused,
                }
            )
        return rows
    raise ConfigError(f"unknown battery {name!r} (use cr4, strat6, splitplot12, unicluster6, all)")


def cmd_oracle(args) -> int:
    rows = []
    if args.battery:
        names = (
            ["cr4", "strat6", "splitplot12", "unicluster6"]
            if args.battery == "all"
            else [args.battery]
        )
        for name in names:
            rows.extend(run_battery(name, cap=args.cap))
    elif args.config:
        config = load_config(args.config)
        base = Path(args.config).parent
        table = build_table(config, base)
        mech = build_mechanism(config, table, base)
        c = build_contrast(config, table)
        q = build_q(config, table, mech, base, choice=args.q, q_file=args.q_file)
        try:
            rows.extend(
                _battery_rows("config", table, mech, [c], [(q.name, q)], args.cap)
            )
        except SupportTooLargeError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("oracle needs --battery or --config")
    all_pass = all(row["pass"] for row in rows)
    payload = {
        "checks": rows,
        "all_pass": all_pass,
        "max_residual": max((row["residual"] for row in rows), default=0.0),
    }
    _emit(payload, args.out)
    return EXIT_OK if all_pass else EXIT_ORACLE


def _parse_models(spec: str) -> list:
    models = {m.name: m for m in simulation.builtin_models()}
    if spec == "all":
        return list(models.values())
    chosen = []
    for token in spec.split(","):
        token = token.strip()
        if ".." in token:
            lo, hi = token.split("..", 1)
            if lo not in ROMAN_MODELS or hi not in ROMAN_MODELS:
                raise ConfigError(f"bad model range {token!r}")
            lo_i, hi_i = ROMAN_MODELS.index(lo), ROMAN_MODELS.index(hi)
            if hi_i < lo_i:
                raise ConfigError(f"bad model range {token!r}")
            chosen.extend(ROMAN_MODELS[lo_i : hi_i + 1])
        elif token in ROMAN_MODELS:
            chosen.append(token)
        else:
            raise ConfigError(f"unknown model {token!r} (use I..VI)")
    return [models[name] for name in dict.fromkeys(chosen)]


def cmd_simulate(args) -> int:
    models = _parse_models(args.models)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    if len(sizes) != 2:
        raise ConfigError("--sizes must give two stratum sizes, e.g. 30,20")
    contrast = tuple(float(v) for v in args.contrast.split(","))
    if len(contrast) != 3:
        raise ConfigError("--contrast must give three coefficients, e.g. 1,-2,1")
    try:
        result = simulation.run_bias_study(
            models, reps=args.reps, contrast=contrast, sizes=sizes, seed=args.seed
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    payload = result.to_dict()
    if args.empirical_draws > 0:
        try:
            payload["empirical"] = [
                simulation.run_empirical_demo(
                    model,
                    sizes=sizes,
                    contrast=contrast,
                    draws=args.empirical_draws,
                    seed=args.seed,
                )
                for model in models
            ]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    study_path = out_dir / "study.json"
    study_path.write_text(render_json(payload))
    rows = simulation.export_boxplot_data(result, out_dir / "boxplot.csv")
    _emit(
        {
            "study": str(study_path),
            "boxplot": str(out_dir / "boxplot.csv"),
            "boxplot_rows": rows,
            "models": [m.model for m in result.models],
        },
        None,
    )
    return EXIT_OK


def cmd_factorial(args) -> int:
    levels = tuple(int(s) for s in args.levels.split(","))
    effect = tuple(int(x) for x in args.effect.split(","))
    vectors = None
    if args.vectors:
        vectors = tuple(
            tuple(float(v) for v in chunk.split(",")) for chunk in args.vectors.split(";")
        )
    try:
        fs = FactorialStructure(levels, effect, vectors)
        c = factorial_contrast(fs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    payload = {
        "levels": list(levels),
        "effect": list(effect),
        "treatments": list(c.treatments),
        "g": dict(c.g),
    }
    _emit(payload, args.out)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randinf",
        description="Randomization-based causal inference under general assignment mechanisms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probs", help="first- and second-order assignment probabilities")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--max-pairs", type=int, default=20000)
    p.set_defaults(handler=cmd_probs)

    p = sub.add_parser("assign", help="draw one assignment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--partition-out", help="also write the partition as CSV")
    p.set_defaults(handler=cmd_assign)

    p = sub.add_parser("analyze", help="estimate a contrast and its variance bound")
    p.add_argument("--config", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--observed", required=True)
    p.add_argument("--q", choices=["strict", "strat", "wholeplot", "half", "file"])
    p.add_argument("--q-file")
    p.add_argument("--tol-ga", type=float)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("check", help="variance report with condition flags")
    p.add_argument("--config", required=True)
    p.add_argument("--q", choices=["strict", "strat", "wholeplot", "half", "file"])
    p.add_argument("--q-file")
    p.add_argument("--tol-ga", type=float)
    p.add_argument("--partition")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("oracle", help="exact enumeration verification battery")
    p.add_argument("--battery", choices=["cr4", "strat6", "splitplot12", "unicluster6", "all"])
    p.add_argument("--config")
    p.add_argument("--q", choices=["strict", "strat", "wholeplot", "half", "file"])
    p.add_argument("--q-file")
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("simulate", help="bias study over the built-in generating models")
    p.add_argument("--models", default="all", help="e.g. I..VI or I,III or all")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--sizes", default="30,20")
    p.add_argument("--contrast", default="1,-2,1")
    p.add_argument(
        "--empirical-draws",
        type=int,
        default=0,
        help="also draw this many assignments per model and average the plug-in bound",
    )
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("factorial", help="build a Kronecker factorial contrast")
    p.add_argument("--levels", required=True, help="e.g. 2,3")
    p.add_argument("--effect", required=True, help="e.g. 1,0")
    p.add_argument("--vectors", help="per-factor vectors, e.g. '-1,1;0.5,0.5'")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_factorial)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except SAPViolationError as exc:
        sys.stderr.write(f"refused: {exc}\n")
        return EXIT_REFUSAL
    except SupportTooLargeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
