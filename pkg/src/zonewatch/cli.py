"""Operator command line.

Subcommands: gen, train, detect, simulate, verify-ledger, report, fuse.
Defaults live in one table, can be overridden by a JSON config file
(--config) and then by explicit flags. Every command writes a run manifest
recording the resolved config and content hashes of inputs and outputs
(hashes are taken over latency-normalized content so reruns compare equal).

Exit codes: 0 success, 2 validation error, 3 data error, 4 verification
failure. Errors print a single machine-parseable line:
`error: <category>: <message>`.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import datagen, evaluation, fusion
from .detector import AutoencoderAnomalyDetector
from .errors import (
    DegenerateEvalError,
    DecodeError,
    InsufficientDataError,
    ScenarioError,
    ValidationError,
    ZonewatchError,
)
from .ledger import export_ledger, import_ledger
from .scenario import SimConfig, SimDriver, parse_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_VERIFY = 4

DEFAULTS = {
    "seed": 0,
    "lr_n": 0.01,
    "epochs": 60,
    "batch_size": 32,
    "patience": 5,
    "split_ratio": 2.0 / 3.0,
    "blocksize": 10,
    "window": 1000,
    "tau": 0.95,
    "train_after": 300,
    "gate_p": 0.01,
    "quantile": 0.99,
    "iforest_trees": 100,
    "iforest_subsample": 256,
    "lof_k": 20,
}

VERDICT_HEADER = ["seq_id", "device_id", "mse", "threshold", "label", "tick",
                  "elapsed_micros"]


class _Fail(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


def _validation(msg):
    return _Fail(EXIT_VALIDATION, "validation", msg)


def _data(msg):
    return _Fail(EXIT_DATA, "data", msg)


# ---------------------------------------------------------------------------
# config and manifest plumbing
# ---------------------------------------------------------------------------

def _resolve_config(args) -> dict:
    config = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path) as fh:
                overrides = json.load(fh)
        except OSError as e:
            raise _data(f"cannot read config {path}: {e}")
        except ValueError as e:
            raise _data(f"bad JSON in config {path}: {e}")
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise _validation(f"unknown config keys: {sorted(unknown)}")
        config.update(overrides)
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            config[key] = flag
    _check_config(config)
    return config


def _check_config(c: dict) -> None:
    if c["lr_n"] <= 0:
        raise _validation(f"lr-n must be > 0, got {c['lr_n']}")
    for key in ("epochs", "batch_size", "patience", "blocksize", "window"):
        if int(c[key]) < 1:
            raise _validation(f"{key} must be >= 1, got {c[key]}")
    for key in ("split_ratio", "gate_p", "quantile"):
        if not 0.0 < float(c[key]) < 1.0:
            raise _validation(f"{key} must be in (0, 1), got {c[key]}")
    if not 0.0 < float(c["tau"]) <= 1.0:
        raise _validation(f"tau must be in (0, 1], got {c['tau']}")
    if int(c["train_after"]) < 50:
        raise _validation(f"train-after must be >= 50, got {c['train_after']}")


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_dir, command: str, config: dict, inputs, outputs) -> Path:
    manifest = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": {str(p): _sha256_file(p) for p in inputs},
        "outputs": {
            str(p): hashlib.sha256(evaluation.normalize_artifact(p)).hexdigest()
            for p in outputs
        },
    }
    path = Path(out_dir) / f"manifest-{command}.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_dataset(path) -> datagen.LabeledDataset:
    try:
        return datagen.load_csv(path)
    except OSError as e:
        raise _data(f"cannot read {path}: {e}")
    except ValidationError as e:
        raise _data(str(e))


def _load_profiles(path):
    if path is None:
        return datagen.default_benign_profile(), {
            name: datagen.default_attack_profile(name)
            for name in datagen.ATTACK_NAMES
        }
    try:
        config = datagen.load_profile_config(path)
        return datagen.profile_from_config(config)
    except OSError as e:
        raise _data(f"cannot read profile {path}: {e}")
    except (ValueError, ValidationError) as e:
        raise _data(f"bad profile config {path}: {e}")


def _write_verdicts_csv(path, verdicts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VERDICT_HEADER)
        for v in verdicts:
            w.writerow([v.seq_id, v.device_id, repr(v.mse), repr(v.threshold),
                        v.label, v.tick, repr(v.elapsed_micros)])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    config = _resolve_config(args)
    if args.benign < 1:
        raise _validation(f"--benign must be >= 1, got {args.benign}")
    benign_profile, attack_profiles = _load_profiles(args.profile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(config["seed"])

    outputs = []
    benign = datagen.gen_benign(benign_profile, args.benign, seed)
    benign_path = out / "benign.csv"
    datagen.save_csv(benign_path, benign)
    outputs.append(benign_path)
    print(f"wrote {benign_path} ({len(benign)} rows)")

    if args.attack is not None:
        name, count_str = args.attack
        try:
            count = int(count_str)
        except ValueError:
            raise _validation(f"attack count must be an integer, got {count_str!r}")
        if count < 1:
            raise _validation(f"attack count must be >= 1, got {count}")
        if name not in attack_profiles:
            raise _validation(
                f"unknown attack {name!r}; valid attacks: "
                f"{', '.join(sorted(attack_profiles))}"
            )
        attack = datagen.gen_attack(attack_profiles[name], benign_profile,
                                    count, seed + 1)
        attack_path = out / "attack.csv"
        datagen.save_csv(attack_path, attack)
        outputs.append(attack_path)
        print(f"wrote {attack_path} ({len(attack)} rows)")

    profile_path = out / "profile.json"
    if args.profile is None:
        datagen.save_profile_config(profile_path, datagen.default_profile_config())
    else:
        profile_path.write_bytes(Path(args.profile).read_bytes())
    outputs.append(profile_path)

    inputs = [args.profile] if args.profile else []
    _write_manifest(out, "gen", config, inputs, outputs)
    return EXIT_OK


def cmd_train(args) -> int:
    config = _resolve_config(args)
    dataset = _load_dataset(args.data)
    if np.any(dataset.labels == 1):
        raise _data(f"{args.data}: training data must be benign-only "
                    f"({int((dataset.labels == 1).sum())} malicious rows found)")

    layer_sizes = None
    if args.layers:
        try:
            layer_sizes = tuple(int(s) for s in args.layers.split(","))
        except ValueError:
            raise _validation(f"--layers must be comma-separated integers, "
                              f"got {args.layers!r}")

    detector = AutoencoderAnomalyDetector(
        layer_sizes=layer_sizes,
        lr_n=float(config["lr_n"]), epochs=int(config["epochs"]),
        batch_size=int(config["batch_size"]), patience=int(config["patience"]),
        split_ratio=float(config["split_ratio"]), seed=int(config["seed"]),
    )
    try:
        detector.fit(dataset.X)
    except (ValidationError, InsufficientDataError) as e:
        raise _data(str(e))

    model_path = Path(args.model)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    detector.save(model_path)

    report_path = Path(args.report) if args.report else model_path.with_suffix(".train-report.json")
    report = {
        "th_v": detector.threshold_.th_v,
        "opt_mean": detector.threshold_.opt_mean,
        "opt_std": detector.threshold_.opt_std,
        "initial_opt_mse": detector.initial_opt_mse_,
        "opt_mse_history": list(detector.history_),
        "best_epoch": detector.best_epoch_,
        "epochs_run": len(detector.history_),
        "layer_sizes": list(detector.model_.architecture.layer_sizes),
        "rows": len(dataset),
    }
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    out_dir = model_path.parent
    _write_manifest(out_dir, "train", config, [args.data],
                    [model_path, report_path])
    print(f"trained on {len(dataset)} rows; th_v={detector.threshold_.th_v:.6g} "
          f"(best epoch {detector.best_epoch_}/{len(detector.history_)})")
    return EXIT_OK


def _load_detector(path) -> AutoencoderAnomalyDetector:
    try:
        return AutoencoderAnomalyDetector.load(path)
    except OSError as e:
        raise _data(f"not-trained: cannot read model {path}: {e}")
    except (ValidationError, ValueError) as e:
        raise _data(f"bad model file {path}: {e}")


def cmd_detect(args) -> int:
    config = _resolve_config(args)
    detector = _load_detector(args.model)
    dataset = _load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    try:
        report = evaluation.run_detector(
            "autoencoder", detector, dataset.X, dataset.labels,
            detector.threshold_.th_v)
    except DegenerateEvalError as e:
        raise _data(str(e))

    scores = detector.score_samples(dataset.X)
    verdicts = []
    from .monitor import LABEL_MALICIOUS, LABEL_NORMAL, Verdict
    for i, (score, dev) in enumerate(zip(scores, dataset.device_ids)):
        label = LABEL_MALICIOUS if score > detector.threshold_.th_v else LABEL_NORMAL
        verdicts.append(Verdict(i + 1, dev, float(score),
                                detector.threshold_.th_v, label, i))
    verdicts_path = out / "verdicts.csv"
    _write_verdicts_csv(verdicts_path, verdicts)

    reports = [report]
    outputs = [verdicts_path]
    inputs = [args.model, args.data]

    if args.baselines:
        if not args.train_data:
            raise _validation("--baselines needs --train-data (benign rows to "
                              "fit and calibrate the baseline detectors)")
        train_ds = _load_dataset(args.train_data)
        benign_rows = train_ds.X[train_ds.labels == 0]
        if len(benign_rows) < 10:
            raise _data(f"{args.train_data}: too few benign rows for baselines")
        inputs.append(args.train_data)
        seed = int(config["seed"])
        fit_rows, calib_rows = datagen.split_rows(benign_rows, 2.0 / 3.0, seed)
        from .baselines import IsolationForestDetector, LocalOutlierFactorDetector
        q = float(config["quantile"])

        iforest = IsolationForestDetector(
            tree_count=int(config["iforest_trees"]),
            subsample_size=min(int(config["iforest_subsample"]), len(fit_rows)),
            seed=seed).fit(fit_rows)
        th_if = evaluation.benign_quantile_threshold(
            iforest.score_samples(calib_rows), q)
        reports.append(evaluation.run_detector(
            "iforest", iforest, dataset.X, dataset.labels, th_if))

        lof = LocalOutlierFactorDetector(
            k=min(int(config["lof_k"]), len(fit_rows) - 1)).fit(fit_rows)
        th_lof = evaluation.benign_quantile_threshold(
            lof.score_samples(calib_rows), q)
        reports.append(evaluation.run_detector(
            "lof", lof, dataset.X, dataset.labels, th_lof))

    for rep in reports:
        path = out / f"report-{rep.detector}.json"
        evaluation.write_report(path, rep)
        outputs.append(path)

    table_path = out / "comparison.csv"
    with open(table_path, "w", newline="") as fh:
        csv.writer(fh).writerows(evaluation.comparison_csv_rows(reports))
    outputs.append(table_path)

    print(evaluation.comparison_table(reports))
    _write_manifest(out, "detect", config, inputs, outputs)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    try:
        text = Path(args.scenario).read_text()
    except OSError as e:
        raise _data(f"cannot read scenario {args.scenario}: {e}")
    try:
        ops = parse_scenario(text)
    except ScenarioError as e:
        raise _validation(f"scenario {args.scenario}: {e}")

    benign_profile, attack_profiles = _load_profiles(args.profile)
    detector = _load_detector(args.model) if args.model else None

    sim_config = SimConfig(
        seed=int(config["seed"]), blocksize=int(config["blocksize"]),
        window=int(config["window"]), tau=float(config["tau"]),
        train_after=int(config["train_after"]),
        train=ae.TrainConfig(
            lr_n=float(config["lr_n"]), epochs=int(config["epochs"]),
            batch_size=int(config["batch_size"]),
            patience=int(config["patience"]), seed=int(config["seed"]),
        ),
        split_ratio=float(config["split_ratio"]),
    )
    driver = SimDriver(sim_config, profile=benign_profile,
                       attacks=attack_profiles, detector=detector)
    try:
        result = driver.run(ops)
    except ScenarioError as e:
        raise _validation(f"scenario {args.scenario}: {e}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for label in sorted(result.zones):
        ledger_path = out / f"ledger-{label}.txt"
        ledger_path.write_text(export_ledger(result.zones[label].ledger))
        outputs.append(ledger_path)
        verdicts_path = out / f"verdicts-{label}.csv"
        _write_verdicts_csv(verdicts_path, result.verdicts[label])
        outputs.append(verdicts_path)

    alerts_path = out / "alerts.csv"
    with open(alerts_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "seq_id", "device_id", "tick", "mse", "threshold"])
        for label, alert in result.alerts:
            w.writerow([label, alert.seq_id, alert.device_id, alert.tick,
                        repr(alert.mse), repr(alert.threshold)])
    outputs.append(alerts_path)

    status_path = out / "zone-status.csv"
    with open(status_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "trust", "status", "malicious", "observed",
                    "window", "tau", "ledger_height", "pool_size",
                    "active_devices", "pending_devices", "orphans"])
        for label in sorted(result.statuses):
            s = result.statuses[label]
            t = s.trust
            w.writerow([label, repr(t.trust), t.status, t.malicious_count,
                        t.observed, t.window, repr(t.tau), s.ledger_height,
                        s.pool_size, s.active_devices, s.pending_devices,
                        len(result.orphans[label])])
    outputs.append(status_path)

    for label in sorted(result.statuses):
        s = result.statuses[label]
        print(f"zone {label}: trust={s.trust.trust:.4f} status={s.trust.status} "
              f"height={s.ledger_height} alerts="
              f"{sum(1 for z, _ in result.alerts if z == label)} "
              f"orphans={len(result.orphans[label])}")

    inputs = [args.scenario] + ([args.model] if args.model else []) \
        + ([args.profile] if args.profile else [])
    _write_manifest(out, "simulate", config, inputs, outputs)
    return EXIT_OK


def cmd_verify_ledger(args) -> int:
    try:
        text = Path(args.path).read_text()
    except OSError as e:
        raise _data(f"cannot read {args.path}: {e}")
    try:
        ledger = import_ledger(text)
    except DecodeError as e:
        print(f"verification failed: undecodable ledger file: {e}")
        return EXIT_VERIFY
    bad = ledger.verify_chain()
    if bad is None:
        print(f"ok height={ledger.height}")
        return EXIT_OK
    print(f"verification failed at height {bad}")
    return EXIT_VERIFY


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        try:
            reports.append(evaluation.read_report(path))
        except OSError as e:
            raise _data(f"cannot read report {path}: {e}")
        except (ValueError, KeyError) as e:
            raise _data(f"bad report file {path}: {e}")
    print(evaluation.comparison_table(reports))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(evaluation.comparison_csv_rows(reports))
    return EXIT_OK


def cmd_fuse(args) -> int:
    config = _resolve_config(args)
    gate_p = float(config["gate_p"])
    noise = {}
    for spec in args.r or []:
        name, _, value = spec.partition("=")
        try:
            noise[name] = float(value)
        except ValueError:
            raise _validation(f"--r expects NAME=VARIANCE, got {spec!r}")
        if noise[name] <= 0:
            raise _validation(f"sensor variance must be > 0, got {spec!r}")

    try:
        rows = []
        with open(args.sensors, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"tick", "sensor_id", "value"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise _data(f"{args.sensors}: header must contain "
                            f"tick,sensor_id,value")
            for i, row in enumerate(reader, start=1):
                try:
                    rows.append((int(row["tick"]), row["sensor_id"],
                                 float(row["value"])))
                except ValueError as e:
                    raise _data(f"{args.sensors}: row {i}: {e}")
    except OSError as e:
        raise _data(f"cannot read {args.sensors}: {e}")
    if not rows:
        raise _data(f"{args.sensors}: no readings")
    rows.sort(key=lambda r: r[0])

    by_tick = {}
    for tick, sensor_id, value in rows:
        by_tick.setdefault(tick, []).append((sensor_id, value))
    ticks = sorted(by_tick)

    first = by_tick[ticks[0]]
    state = fusion.initial_state(
        position=float(np.mean([v for _, v in first])), q_position=args.q,
        q_velocity=args.q)
    state = fusion.KalmanState(state.x, state.P, state.Q, tick=ticks[0])

    specs = {}

    def spec_for(sensor_id):
        if sensor_id not in specs:
            specs[sensor_id] = fusion.SensorSpec(
                sensor_id, R=noise.get(sensor_id, 1.0), gate_p=gate_p)
        return specs[sensor_id]

    out_rows = [["tick", "sensor_id", "value", "accepted",
                 "normalized_innovation", "fused_position", "fused_velocity"]]
    prev_tick = ticks[0]
    for tick in ticks:
        readings = [(spec_for(sid), value) for sid, value in by_tick[tick]]
        state, verdict = fusion.fuse_step(state, readings, tick - prev_tick)
        prev_tick = tick
        rejected = dict(verdict.rejected)
        for sid, value in by_tick[tick]:
            acc = sid not in rejected
            ni = "" if acc else repr(rejected[sid])
            out_rows.append([tick, sid, repr(value), int(acc), ni,
                             repr(state.position), repr(state.velocity)])

    with open(args.out, "w", newline="") as fh:
        csv.writer(fh).writerows(out_rows)
    print(f"wrote {args.out} ({len(out_rows) - 1} readings, "
          f"{len(ticks)} fusion steps)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file overriding the built-in defaults")
    p.add_argument("--seed", type=int, help="master seed (default 0)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr-n", dest="lr_n", type=float,
                   help="gradient descent step size")
    p.add_argument("--epochs", type=int, help="training epoch budget")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--patience", type=int, help="early-stop window")
    p.add_argument("--split-ratio", dest="split_ratio", type=float,
                   help="train : optimization split (default 2/3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zonewatch",
        description="Zoned IoT simulator: ledgered messaging, behavior "
                    "monitoring, anomaly detection benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic benign/attack CSVs")
    p.add_argument("--benign", type=int, required=True, metavar="N")
    p.add_argument("--attack", nargs=2, metavar=("NAME", "N"))
    p.add_argument("--out", required=True)
    p.add_argument("--profile", help="profile config JSON (default: built-in)")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit the autoencoder detector on benign rows")
    p.add_argument("--data", required=True, help="benign feature CSV")
    p.add_argument("--model", required=True, help="output model file (.npz)")
    p.add_argument("--report", help="training report JSON path")
    p.add_argument("--layers", help="comma-separated layer sizes")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score a labeled CSV against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="labeled feature CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--baselines", action="store_true",
                   help="also run isolation forest and LOF")
    p.add_argument("--train-data", dest="train_data",
                   help="benign CSV to fit/calibrate baselines")
    p.add_argument("--quantile", type=float,
                   help="benign score quantile for baseline thresholds")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="run a scenario script")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="preload this trained model for all zones")
    p.add_argument("--profile", help="profile config JSON (default: built-in)")
    p.add_argument("--blocksize", type=int)
    p.add_argument("--window", type=int, help="trust window size")
    p.add_argument("--tau", type=float, help="per-use-case trust threshold")
    p.add_argument("--train-after", dest="train_after", type=int,
                   help="clean-window snapshots before online fitting")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-ledger", help="check an exported chain")
    p.add_argument("path")
    p.set_defaults(func=cmd_verify_ledger)

    p = sub.add_parser("report", help="print a comparison table from report files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--csv", help="also write the combined table as CSV")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fuse", help="Kalman-fuse a sensor reading CSV")
    p.add_argument("--sensors", required=True, help="CSV of tick,sensor_id,value")
    p.add_argument("--out", required=True, help="verdict log CSV")
    p.add_argument("--r", action="append", metavar="NAME=VARIANCE",
                   help="per-sensor noise variance (default 1.0)")
    p.add_argument("--gate-p", dest="gate_p", type=float,
                   help="gating tail probability")
    p.add_argument("--q", type=float, default=1e-3, help="process noise")
    _add_common(p)
    p.set_defaults(func=cmd_fuse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Fail as e:
        print(f"error: {e.category}: {e}", file=sys.stderr)
        return e.code
    except ZonewatchError as e:
        print(f"error: validation: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
