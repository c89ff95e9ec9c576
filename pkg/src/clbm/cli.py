"""Command line entry point: data ingestion, chain runs, synthetic data,
evaluation, the EM baseline and trace summarization.

All artifacts are delimited UTF-8 text. Lines starting with ``#`` carry
column names and the configuration digest; cluster labels in files are
1-based. Given the same resolved configuration (seed included) a run writes
byte-identical artifacts; wall-clock timings go to stdout only.

Subcommands: ``run``, ``simulate``, ``evaluate``, ``bem2``, ``summarize``.
The ``CLBM_OUT_DIR`` environment variable supplies a default output
directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .bem2 import aic3_score, bem2_fit
from .metrics import adjusted_rand_index
from .model import BERNOULLI, VARIANTS, DataMatrix, Hyperparams, log_posterior
from .sampler import MOVE_COUNTER_KEYS, ChainConfig, ChainTrace, MoveSchedule, run_chain
from .simulate import SimSpec, generate
from .summary import iat, map_estimate, modal_summary, pmp_table

TRACE_MAGIC = "# clbm trace v1"

# categorical vote tokens; abstentions and absences count as refusals
VOTING_MAPPING = {"y": 1.0, "n": 0.0, "?": 0.0, "absent": 0.0}


class ParseError(ValueError):
    """Malformed input data, with 1-based coordinates when known."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.col = col


def parse_mapping(text: str) -> dict:
    """Parse a token mapping such as ``y=1,n=0,?=0``."""
    mapping = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad mapping entry {part!r}; expected token=value")
        token, value = part.rsplit("=", 1)
        mapping[token.strip()] = float(value)
    if not mapping:
        raise ValueError("empty mapping")
    return mapping


def _split_line(line: str, delimiter: str | None):
    if delimiter is None:
        return line.split()
    return [tok.strip() for tok in line.split(delimiter)]


def _sniff_delimiter(line: str) -> str | None:
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    return None  # whitespace


def ingest(path, variant: str, mapping: dict | None = None,
           delimiter: str | None = None) -> DataMatrix:
    """Read a delimited text matrix, applying the token mapping if given.

    Binary data must come out as 0/1 after mapping; continuous data parses
    decimal reals. Ragged rows, unmapped tokens and non-numeric cells raise
    :class:`ParseError` with 1-based coordinates.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    path = Path(path)
    lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            lines.append(stripped)
    if not lines:
        raise ParseError(f"no data rows in {path}")
    if delimiter is None:
        delimiter = _sniff_delimiter(lines[0])
    rows = []
    width = None
    for r, line in enumerate(lines, start=1):
        tokens = _split_line(line, delimiter)
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ParseError(f"ragged row: expected {width} cells, found {len(tokens)}", row=r)
        values = []
        for c, tok in enumerate(tokens, start=1):
            if mapping is not None and tok in mapping:
                values.append(mapping[tok])
                continue
            try:
                values.append(float(tok))
            except ValueError:
                kind = "unmapped token" if mapping is not None else "non-numeric cell"
                raise ParseError(f"{kind} {tok!r}", row=r, col=c) from None
        rows.append(values)
    values = np.asarray(rows, dtype=np.float64)
    if variant == BERNOULLI and not np.all((values == 0.0) | (values == 1.0)):
        bad = np.argwhere((values != 0.0) & (values != 1.0))[0]
        raise ParseError(f"binary cell outside {{0, 1}}: {values[tuple(bad)]}",
                         row=int(bad[0]) + 1, col=int(bad[1]) + 1)
    return DataMatrix(values, variant, value_map=mapping)


def read_annotations(path, n: int) -> list:
    """One annotation token per matrix row (for crosstabs)."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            out.append(stripped)
    if len(out) != n:
        raise ParseError(f"expected {n} annotations, found {len(out)}")
    return out


@dataclass(frozen=True)
class RunConfig:
    """Everything a chain run needs; round-trips through JSON."""

    input_path: str
    variant: str
    out_dir: str
    mapping: dict | None = None
    delimiter: str | None = None
    annotations_path: str | None = None
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float | None = None
    delta: float | None = None
    xi: float = 0.0
    tau2: float = 100.0
    k_max: int | None = None
    g_max: int | None = None
    iterations: int = 11000
    burn_in: int = 1000
    thin: int = 10
    seed: int = 0
    init_k: int = 1
    init_g: int = 1
    random_init: bool = False
    p_split: float = 0.5
    metropolis_mix: float = 0.0

    def hyperparams(self) -> Hyperparams:
        base = Hyperparams.for_variant(self.variant)
        over = dict(alpha=self.alpha, beta=self.beta, xi=self.xi, tau2=self.tau2,
                    k_max=self.k_max, g_max=self.g_max)
        if self.gamma is not None:
            over["gamma"] = self.gamma
        if self.delta is not None:
            over["delta"] = self.delta
        return replace(base, **over)

    def chain_config(self) -> ChainConfig:
        return ChainConfig(iterations=self.iterations, burn_in=self.burn_in,
                           thin=self.thin, seed=self.seed, init_k=self.init_k,
                           init_g=self.init_g, random_init=self.random_init)

    def schedule(self) -> MoveSchedule:
        return MoveSchedule(p_split=self.p_split, metropolis_mix=self.metropolis_mix)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = {k: v for k, v in d.items() if k != "digest"}
        return cls(**d)

    def digest(self) -> str:
        """Hash of the experiment settings; where artifacts land is excluded,
        so the same run written elsewhere carries the same digest."""
        payload = {k: v for k, v in self.to_dict().items() if k != "out_dir"}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# artifact writers and readers


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace(path, trace: ChainTrace, digest: str = "") -> None:
    cfg, sched, hp = trace.config, trace.schedule, trace.hp
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_MAGIC + "\n")
        fh.write(f"# digest={digest}\n")
        fh.write(f"# n={trace.n} m={trace.m} variant={trace.variant}\n")
        fh.write(f"# hp alpha={_fmt(hp.alpha)} beta={_fmt(hp.beta)} gamma={_fmt(hp.gamma)}"
                 f" delta={_fmt(hp.delta)} xi={_fmt(hp.xi)} tau2={_fmt(hp.tau2)}"
                 f" k_max={hp.k_max} g_max={hp.g_max}\n")
        fh.write(f"# chain iterations={cfg.iterations} burn_in={cfg.burn_in} thin={cfg.thin}"
                 f" seed={cfg.seed} init_k={cfg.init_k} init_g={cfg.init_g}"
                 f" random_init={int(cfg.random_init)}\n")
        fh.write(f"# schedule p_split={_fmt(sched.p_split)}"
                 f" metropolis_mix={_fmt(sched.metropolis_mix)}\n")
        fh.write("# counters " + " ".join(f"{k}={trace.counters[k]}" for k in MOVE_COUNTER_KEYS) + "\n")
        zcols = ",".join(f"z_{i + 1}" for i in range(trace.n))
        wcols = ",".join(f"w_{j + 1}" for j in range(trace.m))
        fh.write(f"# columns: sample,sweep,K,G,K_nonempty,G_nonempty,log_posterior,{zcols},{wcols}\n")
        for idx in range(trace.n_samples):
            zs = ",".join(str(v + 1) for v in trace.z[idx])
            ws = ",".join(str(v + 1) for v in trace.w[idx])
            fh.write(f"{idx},{trace.sweep_of(idx)},{trace.k[idx]},{trace.g[idx]},"
                     f"{trace.k_nonempty[idx]},{trace.g_nonempty[idx]},"
                     f"{_fmt(trace.log_post[idx])},{zs},{ws}\n")


def _parse_kv(line: str, prefix: str) -> dict:
    body = line[len(prefix):].strip()
    out = {}
    for part in body.split():
        k, v = part.split("=", 1)
        out[k] = v
    return out


def read_trace(path, data: DataMatrix | None = None, verify_samples: int = 8,
               tolerance: float = 1e-6) -> ChainTrace:
    """Parse a trace file back into a :class:`ChainTrace`.

    If the originating data matrix is supplied, the stored log posterior of a
    spread of samples is re-verified against a from-scratch recomputation.
    """
    header: dict = {}
    counters = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != TRACE_MAGIC:
            raise ParseError(f"not a trace file: {path}")
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("# digest="):
                header["digest"] = line[len("# digest="):].strip()
            elif line.startswith("# hp "):
                header.update(_parse_kv(line, "# hp "))
            elif line.startswith("# chain "):
                header.update(_parse_kv(line, "# chain "))
            elif line.startswith("# schedule "):
                header.update(_parse_kv(line, "# schedule "))
            elif line.startswith("# counters "):
                counters = {k: int(v) for k, v in _parse_kv(line, "# counters ").items()}
            elif line.startswith("# n="):
                header.update(_parse_kv(line, "# "))
            elif line.startswith("#"):
                continue
            else:
                rows.append(line)
    n = int(header["n"])
    m = int(header["m"])
    hp = Hyperparams(alpha=float(header["alpha"]), beta=float(header["beta"]),
                     gamma=float(header["gamma"]), delta=float(header["delta"]),
                     xi=float(header["xi"]), tau2=float(header["tau2"]),
                     k_max=int(header["k_max"]), g_max=int(header["g_max"]))
    cfg = ChainConfig(iterations=int(header["iterations"]), burn_in=int(header["burn_in"]),
                      thin=int(header["thin"]), seed=int(header["seed"]),
                      init_k=int(header["init_k"]), init_g=int(header["init_g"]),
                      random_init=bool(int(header["random_init"])))
    sched = MoveSchedule(p_split=float(header["p_split"]),
                         metropolis_mix=float(header["metropolis_mix"]))
    ns = len(rows)
    k = np.empty(ns, np.int64)
    g = np.empty(ns, np.int64)
    kne = np.empty(ns, np.int64)
    gne = np.empty(ns, np.int64)
    lp = np.empty(ns, np.float64)
    z = np.empty((ns, n), np.int32)
    w = np.empty((ns, m), np.int32)
    for idx, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != 7 + n + m:
            raise ParseError(f"trace record has {len(parts)} fields, expected {7 + n + m}",
                             row=idx + 1)
        k[idx] = int(parts[2])
        g[idx] = int(parts[3])
        kne[idx] = int(parts[4])
        gne[idx] = int(parts[5])
        lp[idx] = float(parts[6])
        z[idx] = [int(v) - 1 for v in parts[7:7 + n]]
        w[idx] = [int(v) - 1 for v in parts[7 + n:]]
    trace = ChainTrace(k=k, g=g, k_nonempty=kne, g_nonempty=gne, log_post=lp,
                       z=z, w=w, counters=counters, config=cfg, schedule=sched,
                       hp=hp, variant=header["variant"], n=n, m=m,
                       digest=header.get("digest", ""))
    if data is not None and ns > 0:
        for idx in np.linspace(0, ns - 1, min(verify_samples, ns)).astype(int):
            state = trace.reconstruct_state(int(idx), data)
            ref = log_posterior(state)
            if abs(ref - lp[idx]) > tolerance * max(1.0, abs(ref)):
                raise ParseError(
                    f"stored log posterior {lp[idx]} disagrees with recomputation {ref}",
                    row=int(idx) + 1)
    return trace


def write_pmp(path, table, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("# columns: K,G,count,pmp\n")
        for k, g, c, p in table.as_rows():
            fh.write(f"{k},{g},{c},{_fmt(p)}\n")


def write_iat(path, result, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("# columns: tau,lags_used,degenerate\n")
        fh.write(f"{_fmt(result.tau)},{result.lags_used},{int(result.degenerate)}\n")


def write_modal(path, q: np.ndarray, hard: np.ndarray, axis_name: str,
                k_hat: int, g_hat: int, n_occurrences: int, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write(f"# modal model K={k_hat} G={g_hat} occurrences={n_occurrences}\n")
        qcols = ",".join(f"q_{c + 1}" for c in range(q.shape[1]))
        fh.write(f"# columns: {axis_name},{qcols},hard\n")
        for i in range(q.shape[0]):
            probs = ",".join(_fmt(v) for v in q[i])
            fh.write(f"{i + 1},{probs},{hard[i] + 1}\n")


def write_map(path, est, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write(f"# MAP clustering K={est.k} G={est.g}"
                 f" log_posterior={_fmt(est.log_posterior)} sample_index={est.sample_index}\n")
        fh.write("# columns: axis,labels...\n")
        fh.write("z," + ",".join(str(v + 1) for v in est.z) + "\n")
        fh.write("w," + ",".join(str(v + 1) for v in est.w) + "\n")


def write_acceptance(path, trace: ChainTrace, digest: str = "") -> None:
    rates = trace.acceptance_rates()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("# columns: move,proposed,accepted,rate\n")
        for move, rate in rates.items():
            prop = trace.counters[f"{move}_proposed"]
            acc = trace.counters[f"{move}_accepted"]
            fh.write(f"{move},{prop},{acc},{_fmt(rate) if prop else 'nan'}\n")


def write_crosstab(path, hard_labels: np.ndarray, annotations: list, digest: str = "") -> None:
    """Cluster-by-annotation contingency counts from hard assignments."""
    cats = sorted(set(annotations))
    k_hat = int(hard_labels.max()) + 1
    counts = np.zeros((k_hat, len(cats)), dtype=np.int64)
    cat_index = {c: j for j, c in enumerate(cats)}
    for lab, ann in zip(hard_labels, annotations):
        counts[int(lab), cat_index[ann]] += 1
    order = np.argsort(-counts.sum(axis=1), kind="stable")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("# clusters sorted by size; labels refer to modal hard assignments\n")
        fh.write("# columns: cluster,size," + ",".join(cats) + "\n")
        for k in order:
            row = ",".join(str(v) for v in counts[k])
            fh.write(f"{k + 1},{counts[k].sum()},{row}\n")


def write_labels(path, labels: np.ndarray, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("# columns: label\n")
        for v in labels:
            fh.write(f"{int(v) + 1}\n")


def read_labels(path) -> np.ndarray:
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            vals.append(int(stripped))
    if not vals:
        raise ParseError(f"no labels in {path}")
    return np.asarray(vals, dtype=np.int64) - 1


def write_matrix(path, data: DataMatrix, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write(f"# variant={data.variant} n={data.n} m={data.m}\n")
        binary = data.variant == BERNOULLI
        for i in range(data.n):
            if binary:
                fh.write(",".join(str(int(v)) for v in data.values[i]) + "\n")
            else:
                fh.write(",".join(_fmt(v) for v in data.values[i]) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _summaries_for(trace: ChainTrace, out: Path, digest: str, annotations=None):
    written = []

    def _emit(name, writer, *args):
        p = out / name
        writer(p, *args, digest=digest)
        written.append(name)

    _emit("pmp.csv", write_pmp, pmp_table(trace))
    _emit("pmp_nonempty.csv", write_pmp, pmp_table(trace, nonempty=True))
    if trace.n_samples >= 100:
        _emit("iat.txt", write_iat, iat(trace))
    summary = modal_summary(trace)
    _emit("modal_rows.csv", write_modal, summary.q_rows, summary.hard_rows, "row",
          summary.k_hat, summary.g_hat, summary.n_occurrences)
    _emit("modal_cols.csv", write_modal, summary.q_cols, summary.hard_cols, "col",
          summary.k_hat, summary.g_hat, summary.n_occurrences)
    _emit("map.csv", write_map, map_estimate(trace))
    _emit("acceptance.csv", write_acceptance, trace)
    if annotations is not None:
        _emit("crosstab.csv", write_crosstab, summary.hard_rows, annotations)
    return written


def _run_single(config: RunConfig, out: Path) -> ChainTrace:
    out.mkdir(parents=True, exist_ok=True)
    data = ingest(config.input_path, config.variant, config.mapping, config.delimiter)
    annotations = None
    if config.annotations_path:
        annotations = read_annotations(config.annotations_path, data.n)
    digest = config.digest()
    trace = run_chain(data, config.hyperparams(), config.chain_config(), config.schedule())
    trace.digest = digest
    written = []
    try:
        cfg_dict = config.to_dict()
        cfg_dict["digest"] = digest
        (out / "config.json").write_text(json.dumps(cfg_dict, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
        written.append("config.json")
        write_trace(out / "trace.csv", trace, digest)
        written.append("trace.csv")
        written += _summaries_for(trace, out, digest, annotations)
    except Exception as exc:
        manifest = {"written": written, "error": str(exc)}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                           encoding="utf-8")
        raise
    return trace


def _run_seed_job(args):
    config_dict, out_dir = args
    config = RunConfig.from_dict(config_dict)
    trace = _run_single(config, Path(out_dir))
    return config.seed, trace.sweeps_per_second


def cmd_run(args) -> int:
    config = _config_from_args(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [config.seed]
    out_root = Path(config.out_dir)
    if len(seeds) == 1:
        config = replace(config, seed=seeds[0])
        trace = _run_single(config, out_root)
        print(f"run complete: seed={config.seed} samples={trace.n_samples} "
              f"sweeps_per_second={trace.sweeps_per_second:.1f}")
        return 0
    jobs = []
    for seed in seeds:
        sub = out_root / f"chain-{seed}"
        cfg = replace(config, seed=seed, out_dir=str(sub))
        jobs.append((cfg.to_dict(), str(sub)))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_seed_job, jobs))
    else:
        results = [_run_seed_job(j) for j in jobs]
    for seed, sps in results:
        print(f"run complete: seed={seed} sweeps_per_second={sps:.1f}")
    return 0


def cmd_simulate(args) -> int:
    spec = SimSpec(n=args.rows, m=args.cols, k=args.row_clusters, g=args.col_clusters,
                   theta_low=args.theta_low, theta_high=args.theta_high,
                   seed=args.seed, scramble=not args.no_scramble)
    result = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(json.dumps(asdict(spec), sort_keys=True).encode()).hexdigest()[:16]
    write_matrix(out / "matrix.csv", result.data, digest)
    write_labels(out / "truth_rows.txt", result.row_labels, digest)
    write_labels(out / "truth_cols.txt", result.col_labels, digest)
    with open(out / "theta.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("# columns: block success probabilities, one row cluster per line\n")
        for row in result.theta:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    (out / "simspec.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    print(f"simulated {spec.n}x{spec.m} matrix with ({spec.k},{spec.g}) clusters -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    true_rows = read_labels(args.true_rows)
    pred_rows = read_labels(args.pred_rows)
    ari_rows = adjusted_rand_index(true_rows, pred_rows)
    print(f"ari_rows={ari_rows:.6f}")
    if args.true_cols and args.pred_cols:
        ari_cols = adjusted_rand_index(read_labels(args.true_cols), read_labels(args.pred_cols))
        print(f"ari_cols={ari_cols:.6f}")
    return 0


def cmd_bem2(args) -> int:
    mapping = _mapping_from_args(args)
    data = ingest(args.input, args.variant, mapping, args.delimiter)
    result = bem2_fit(data, args.k, args.g, seed=args.seed, tol=args.tol,
                      max_iter=args.max_iter, n_restarts=args.restarts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = ""
    write_labels(out / "bem2_rows.txt", result.hard_rows, digest)
    write_labels(out / "bem2_cols.txt", result.hard_cols, digest)
    score = aic3_score(data, result.hard_rows, result.hard_cols, args.k, args.g)
    with open(out / "bem2_report.txt", "w", encoding="utf-8") as fh:
        fh.write("# columns: key,value\n")
        fh.write(f"criterion,{_fmt(result.criterion)}\n")
        fh.write(f"aic3,{_fmt(score)}\n")
        fh.write(f"iterations,{result.n_iterations}\n")
        fh.write(f"converged,{int(result.converged)}\n")
        fh.write(f"row_clusters_used,{len(np.unique(result.hard_rows))}\n")
        fh.write(f"col_clusters_used,{len(np.unique(result.hard_cols))}\n")
    print(f"bem2 fit: criterion={result.criterion:.4f} aic3={score:.4f} "
          f"clusters_used=({len(np.unique(result.hard_rows))},{len(np.unique(result.hard_cols))})")
    return 0


def _pool_traces(traces):
    base = traces[0]
    for t in traces[1:]:
        if (t.n, t.m, t.variant) != (base.n, base.m, base.variant):
            raise ValueError("traces pool different data shapes or variants")
    return ChainTrace(
        k=np.concatenate([t.k for t in traces]),
        g=np.concatenate([t.g for t in traces]),
        k_nonempty=np.concatenate([t.k_nonempty for t in traces]),
        g_nonempty=np.concatenate([t.g_nonempty for t in traces]),
        log_post=np.concatenate([t.log_post for t in traces]),
        z=np.vstack([t.z for t in traces]),
        w=np.vstack([t.w for t in traces]),
        counters={k: sum(t.counters.get(k, 0) for t in traces) for k in MOVE_COUNTER_KEYS},
        config=base.config, schedule=base.schedule, hp=base.hp,
        variant=base.variant, n=base.n, m=base.m,
    )


def cmd_summarize(args) -> int:
    data = None
    if args.input:
        mapping = _mapping_from_args(args)
        data = ingest(args.input, args.variant, mapping, args.delimiter)
    traces = [read_trace(p, data=data) for p in args.trace]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pooled = _pool_traces(traces) if len(traces) > 1 else traces[0]
    digest = "pooled" if len(traces) > 1 else traces[0].digest
    _summaries_for(pooled, out, digest)
    if len(traces) > 1:
        with open(out / "iat_per_chain.txt", "w", encoding="utf-8") as fh:
            fh.write("# columns: chain,tau,lags_used,degenerate\n")
            for idx, t in enumerate(traces):
                if t.n_samples >= 100:
                    r = iat(t)
                    fh.write(f"{idx},{_fmt(r.tau)},{r.lags_used},{int(r.degenerate)}\n")
    print(f"summaries written to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _mapping_from_args(args) -> dict | None:
    if getattr(args, "voting_mapping", False):
        return dict(VOTING_MAPPING)
    if getattr(args, "mapping", None):
        return parse_mapping(args.mapping)
    return None


def _config_from_args(args) -> RunConfig:
    if args.config:
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = RunConfig.from_dict(loaded)
        if args.out:
            config = replace(config, out_dir=args.out)
        return config
    out_dir = args.out or os.environ.get("CLBM_OUT_DIR")
    if not out_dir:
        raise SystemExit("no output directory: pass --out or set CLBM_OUT_DIR")
    if not args.input:
        raise SystemExit("--input is required (or use --config)")
    mapping = _mapping_from_args(args)
    return RunConfig(
        input_path=args.input, variant=args.variant, out_dir=out_dir,
        mapping=mapping, delimiter=args.delimiter,
        annotations_path=args.annotations,
        alpha=args.alpha, beta=args.beta, gamma=args.gamma, delta=args.delta,
        xi=args.xi, tau2=args.tau2, k_max=args.k_max, g_max=args.g_max,
        iterations=args.iterations, burn_in=args.burn_in, thin=args.thin,
        seed=args.seed, init_k=args.init_k, init_g=args.init_g,
        random_init=args.random_init, p_split=args.p_split,
        metropolis_mix=args.metropolis_mix,
    )


def _add_mapping_args(p):
    p.add_argument("--mapping", help="token mapping, e.g. 'y=1,n=0,?=0'")
    p.add_argument("--voting-mapping", action="store_true",
                   help="preset mapping: y=1; n, ?, absent=0")
    p.add_argument("--delimiter", choices=[",", "\t"], default=None,
                   help="cell delimiter (default: sniffed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clbm",
                                     description="Collapsed Bayesian latent block models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a chain on a data matrix and write artifacts")
    p.add_argument("--input", help="path to the delimited data matrix")
    p.add_argument("--variant", choices=list(VARIANTS), default=BERNOULLI)
    _add_mapping_args(p)
    p.add_argument("--annotations", help="row annotation file for crosstabs")
    p.add_argument("--config", help="load a previously emitted config.json")
    p.add_argument("--out", help="output directory (default: $CLBM_OUT_DIR)")
    p.add_argument("--iterations", type=int, default=11000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="comma-separated seeds; one sub-directory per chain")
    p.add_argument("--workers", type=int, default=1, help="parallel chains for --seeds")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--tau2", type=float, default=100.0)
    p.add_argument("--k-max", dest="k_max", type=int, default=None)
    p.add_argument("--g-max", dest="g_max", type=int, default=None)
    p.add_argument("--init-k", dest="init_k", type=int, default=1)
    p.add_argument("--init-g", dest="init_g", type=int, default=1)
    p.add_argument("--random-init", dest="random_init", action="store_true")
    p.add_argument("--p-split", dest="p_split", type=float, default=0.5)
    p.add_argument("--metropolis-mix", dest="metropolis_mix", type=float, default=0.0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="generate a synthetic block-structured matrix")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--row-clusters", type=int, required=True)
    p.add_argument("--col-clusters", type=int, required=True)
    p.add_argument("--theta-low", type=float, default=0.0)
    p.add_argument("--theta-high", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-scramble", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="adjusted Rand index between label files")
    p.add_argument("--true-rows", required=True)
    p.add_argument("--pred-rows", required=True)
    p.add_argument("--true-cols")
    p.add_argument("--pred-cols")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bem2", help="variational EM baseline at fixed (K, G)")
    p.add_argument("--input", required=True)
    p.add_argument("--variant", choices=list(VARIANTS), default=BERNOULLI)
    _add_mapping_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=5000)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bem2)

    p = sub.add_parser("summarize", help="recompute summaries from trace files")
    p.add_argument("--trace", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--input", help="original data matrix, for log-posterior verification")
    p.add_argument("--variant", choices=list(VARIANTS), default=BERNOULLI)
    _add_mapping_args(p)
    p.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
