"""Command-line interface for the scoring engine.

Exit codes: 0 success, 1 engine error (one machine-readable diagnostic line
on stderr), 2 usage error.  A flat TOML config file may set any engine
default; explicit flags override file values.
"""

from __future__ import annotations

import functools
import json
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import _kernels
from .clustering import PrePartition, SuperEntityMap, build_super_map
from .config import EngineConfig
from .embedding_store import load_embeddings
from .errors import RahpError
from .evaluation import GroundTruthScene, evaluate_corpus
from .inference import SceneGraphOut, build_scene_graph
from .losses import BBox, bbox_loss, distill_l1, entity_ce, predicate_focal
from .mining import (
    MiningRequest,
    KIND_NAMES,
    KIND_REGION,
    mine_region_descriptions,
    mine_super_names,
)
from .prompts import (
    RegionDescriptionSet,
    Vocabulary,
    build_entity_prompts,
    build_region_prompts,
    index_hierarchy,
)
from .scorer import ProposalBatch, ScorerConfig, load_scores, save_scores, score_batch


def _engine_errors(fn):
    """Convert engine errors to exit code 1 with one diagnostic line."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RahpError as exc:
            click.echo(
                f"error kind={type(exc).__name__} msg={str(exc)!r}", err=True
            )
            sys.exit(1)
        except (ValueError, KeyError, OSError) as exc:
            click.echo(
                f"error kind={type(exc).__name__} msg={str(exc)!r}", err=True
            )
            sys.exit(1)

    return wrapper


def _config(ctx) -> EngineConfig:
    return ctx.obj["config"]


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Flat TOML file overriding engine defaults.")
@click.pass_context
def main(ctx, config_path):
    """Hierarchical relation scoring engine."""
    ctx.ensure_object(dict)
    try:
        cfg = EngineConfig.load(config_path) if config_path else EngineConfig()
    except (ValueError, OSError) as exc:
        click.echo(f"error kind={type(exc).__name__} msg={str(exc)!r}", err=True)
        sys.exit(1)
    ctx.obj["config"] = cfg


@main.command()
@click.option("--embeddings", required=True, type=click.Path(exists=True),
              help="Binary entity embedding matrix.")
@click.option("--names", "names_path", required=True,
              type=click.Path(exists=True),
              help="JSON list of super-entity names.")
@click.option("--num-super", type=int, default=None)
@click.option("--pre-partition", type=click.Path(exists=True), default=None,
              help="JSON {\"groups\": [[...], ...]} of disjoint entity groups.")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@_engine_errors
def cluster(ctx, embeddings, names_path, num_super, pre_partition, seed, out):
    """Cluster entity embeddings into named super entities."""
    cfg = _config(ctx).override(num_super=num_super, seed=seed)
    emb = load_embeddings(embeddings, "binary")
    with open(names_path, "r", encoding="utf-8") as fh:
        names = json.load(fh)
    pp = PrePartition.load(pre_partition) if pre_partition else None
    smap = build_super_map(emb, cfg.num_super, names, pre_partition=pp,
                           seed=cfg.seed)
    smap.save(out)
    click.echo(f"wrote {out}: {smap.count} super entities over "
               f"{len(smap.assignment)} entities")


@main.command()
@click.option("--vocab", required=True, type=click.Path(exists=True))
@click.option("--smap", required=True, type=click.Path(exists=True))
@click.option("--regions", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@_engine_errors
def prompts(vocab, smap, regions, out):
    """Emit every prompt string the text encoder must embed."""
    voc = Vocabulary.load(vocab)
    sm = SuperEntityMap.load(smap)
    reg = RegionDescriptionSet.load(regions) if regions else RegionDescriptionSet()
    entity = [p for _, _, p in build_entity_prompts(voc, sm)]
    region: list[str] = []
    seen: set[str] = set()
    for _, _, ps in build_region_prompts(reg):
        for p in ps:
            if p not in seen:
                seen.add(p)
                region.append(p)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump({"entity_prompts": entity, "region_prompts": region}, fh,
                  indent=1)
    click.echo(f"wrote {out}: {len(entity)} entity prompts, "
               f"{len(region)} region prompts")


@main.group()
def mine():
    """Mine region descriptions or super-entity names from an LLM."""


@mine.command("regions")
@click.option("--subject", required=True)
@click.option("--predicate", required=True)
@click.option("--object", "obj", required=True)
@click.option("--endpoint", default=None,
              help="LLM HTTP endpoint (or set RAHP_LLM_ENDPOINT).")
@click.option("--fixtures", default=None, type=click.Path(exists=True),
              help="Offline fixture directory (no network).")
@click.option("--archive", default=None, type=click.Path(),
              help="Response archive directory for online mode.")
@click.option("--out", required=True, type=click.Path())
@click.option("--merge-into", default=None, type=click.Path(),
              help="Existing region-description JSON to merge with.")
@_engine_errors
def mine_regions(subject, predicate, obj, endpoint, fixtures, archive, out,
                 merge_into):
    """Mine part-level region descriptions for one triplet."""
    req = MiningRequest(KIND_REGION, (subject, predicate, obj),
                        endpoint=endpoint, fixtures_dir=fixtures,
                        archive_dir=archive)
    mined = mine_region_descriptions(req)
    if merge_into and Path(merge_into).exists():
        base = RegionDescriptionSet.load(merge_into)
        base.merge(mined)
        mined = base
    mined.save(out)
    n = len(mined.get((subject, predicate, obj)))
    click.echo(f"wrote {out}: {n} descriptions for "
               f"[{subject}] [{predicate}] [{obj}]")


@mine.command("names")
@click.option("--clusters", required=True, type=click.Path(exists=True),
              help="JSON list of cluster member-name lists.")
@click.option("--endpoint", default=None)
@click.option("--fixtures", default=None, type=click.Path(exists=True))
@click.option("--archive", default=None, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_engine_errors
def mine_names(clusters, endpoint, fixtures, archive, out):
    """Name each entity cluster with a 1-3 word superclass."""
    with open(clusters, "r", encoding="utf-8") as fh:
        member_lists = json.load(fh)
    req = MiningRequest(KIND_NAMES, member_lists, endpoint=endpoint,
                        fixtures_dir=fixtures, archive_dir=archive)
    names = mine_super_names(req)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(names, fh, indent=1)
    click.echo(f"wrote {out}: {len(names)} names")


def _image_dirs(corpus: Path) -> list[Path]:
    return sorted((corpus / "images").iterdir())


def _build_hierarchy(corpus: Path, smap_path):
    voc = Vocabulary.load(corpus / "vocab.json")
    sm = SuperEntityMap.load(smap_path)
    regions_path = corpus / "regions.json"
    reg = (RegionDescriptionSet.load(regions_path) if regions_path.exists()
           else RegionDescriptionSet())
    text = load_embeddings(corpus / "text_emb.bin", "binary")
    return index_hierarchy(voc, sm, reg, text)


def _score_one_image(img_dir: Path, hier, scfg, out_dir: Path) -> None:
    batch = ProposalBatch.load(img_dir / "proposals.json",
                               img_dir / "r.bin", img_dir / "u.bin")
    scores, audit = score_batch(batch, hier, scfg)
    save_scores(out_dir / f"{img_dir.name}.json", scores, audit)


def _run_scoring(corpus: Path, smap_path, cfg: EngineConfig,
                 threads: int, out_dir: Path) -> int:
    hier = _build_hierarchy(corpus, smap_path)
    scfg = ScorerConfig(alpha=cfg.alpha, k=cfg.k,
                        softmax_temperature=cfg.softmax_temperature)
    out_dir.mkdir(parents=True, exist_ok=True)
    dirs = _image_dirs(corpus)
    if threads <= 1:
        for d in dirs:
            _score_one_image(d, hier, scfg, out_dir)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(
                lambda d: _score_one_image(d, hier, scfg, out_dir), dirs
            ))
    return len(dirs)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--smap", "smap_path", required=True,
              type=click.Path(exists=True))
@click.option("--alpha", type=float, default=None)
@click.option("--k", type=int, default=None)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads; results are identical for any value.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@_engine_errors
def score(ctx, corpus, smap_path, alpha, k, threads, out):
    """Score every proposal of every corpus image."""
    cfg = _config(ctx).override(alpha=alpha, k=k)
    t0 = time.perf_counter()
    n = _run_scoring(Path(corpus), smap_path, cfg, threads, Path(out))
    dt = time.perf_counter() - t0
    click.echo(f"scored {n} images in {dt:.2f}s "
               f"(alpha={cfg.alpha} k={cfg.k} backend={_kernels.BACKEND})")


def _infer_one_image(img_dir: Path, scores_dir: Path, cfg: EngineConfig,
                     graph_constraint: bool, out_dir: Path) -> None:
    with open(img_dir / "proposals.json", "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    rows, _ = load_scores(scores_dir / f"{img_dir.name}.json")
    entities = tuple(
        (e["label"], tuple(e["box"]), float(e.get("prob", 1.0)))
        for e in doc["entities"]
    )
    proposals = [
        (p["subj_index"], p["obj_index"],
         float(p.get("subj_prob", 1.0)), float(p.get("obj_prob", 1.0)))
        for p in doc["proposals"]
    ]
    graph = build_scene_graph(
        doc["image_id"], entities, proposals, rows,
        temperature=cfg.softmax_temperature, top_m=cfg.top_m,
        graph_constraint=graph_constraint,
    )
    graph.save(out_dir / f"{img_dir.name}.json")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_dir", required=True,
              type=click.Path(exists=True))
@click.option("--top-m", type=int, default=None)
@click.option("--temperature", "softmax_temperature", type=float, default=None)
@click.option("--graph-constraint", is_flag=True, default=False,
              help="Keep only the best predicate per ordered entity pair.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@_engine_errors
def infer(ctx, corpus, scores_dir, top_m, softmax_temperature,
          graph_constraint, out):
    """Assemble ranked top-M scene graphs from saved scores."""
    cfg = _config(ctx).override(top_m=top_m,
                                softmax_temperature=softmax_temperature)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dirs = _image_dirs(Path(corpus))
    for d in dirs:
        _infer_one_image(d, Path(scores_dir), cfg, graph_constraint, out_dir)
    click.echo(f"built {len(dirs)} scene graphs (top_m={cfg.top_m})")


def _run_eval(graphs_dir: Path, gt_path, vocab_path, protocol,
              iou_thresh, ks):
    voc = Vocabulary.load(vocab_path)
    gts = GroundTruthScene.load_corpus(gt_path)
    preds = [SceneGraphOut.load(p) for p in sorted(graphs_dir.glob("*.json"))]
    return evaluate_corpus(preds, gts, voc, protocol, iou_thresh, ks)


@main.command("eval")
@click.option("--graphs", "graphs_dir", required=True,
              type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--protocol", type=click.Choice(["predcls", "sgdet"]),
              default="predcls", show_default=True)
@click.option("--iou", "iou_thresh", type=float, default=None)
@click.option("--ks", default="50,100", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@_engine_errors
def eval_cmd(ctx, graphs_dir, gt_path, vocab_path, protocol, iou_thresh, ks,
             out):
    """Recall@K / mean-Recall@K over total, base, and novel splits."""
    cfg = _config(ctx).override(iou_thresh=iou_thresh)
    k_list = tuple(int(x) for x in ks.split(","))
    report = _run_eval(Path(graphs_dir), gt_path, vocab_path, protocol,
                       cfg.iou_thresh, k_list)
    report.save(out)
    for split in ("total", "base", "novel"):
        vals = " ".join(
            f"R@{k}={report.splits[split]['recall'][str(k)]:.4f}"
            for k in k_list
        )
        click.echo(f"{split}: {vals}")


@main.command("loss-check")
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@_engine_errors
def loss_check(ctx, trials, seed, out):
    """Verify every analytic loss gradient against finite differences."""
    cfg = _config(ctx).override(seed=seed)
    report = _loss_check_report(trials, cfg)
    ok = True
    for name, err in report.items():
        status = "pass" if err <= 1e-4 else "FAIL"
        ok = ok and err <= 1e-4
        click.echo(f"{name}: max relative gradient error {err:.3e} [{status}]")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    if not ok:
        sys.exit(1)


def _fd_grad(fn, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(1.0, float(np.abs(numeric).max()))
    return float(np.abs(analytic - numeric).max()) / denom


def _loss_check_report(trials: int, cfg: EngineConfig) -> dict[str, float]:
    rng = np.random.default_rng(cfg.seed)
    errs = {"bbox": 0.0, "entity_ce": 0.0, "predicate_focal": 0.0,
            "distill_l1": 0.0}
    margin = 0.05  # keep samples away from subgradient kinks
    for _ in range(trials):
        # Box regression: resample until no coordinate sits near a kink.
        while True:
            b = np.sort(rng.uniform(0, 10, 4))
            g = np.sort(rng.uniform(0, 10, 4))
            bb = np.array([b[0], b[1], b[2] + 1, b[3] + 1])
            gb = np.array([g[0], g[1], g[2] + 1, g[3] + 1])
            if np.abs(bb - gb).min() > margin:
                break
        box = BBox(*bb)
        gt = BBox(*gb)
        _, grad = bbox_loss(box, gt)
        num = _fd_grad(lambda v: bbox_loss(BBox(*v), gt)[0], bb)
        errs["bbox"] = max(errs["bbox"], _rel_err(grad, num))

        logits = rng.standard_normal(12)
        t = int(rng.integers(12))
        _, grad = entity_ce(logits, t)
        num = _fd_grad(lambda v: entity_ce(v, t)[0], logits)
        errs["entity_ce"] = max(errs["entity_ce"], _rel_err(grad, num))

        _, grad = predicate_focal(logits, t, cfg.focal_gamma,
                                  cfg.focal_balance)
        num = _fd_grad(
            lambda v: predicate_focal(v, t, cfg.focal_gamma,
                                      cfg.focal_balance)[0],
            logits,
        )
        errs["predicate_focal"] = max(errs["predicate_focal"],
                                      _rel_err(grad, num))

        while True:
            r = rng.standard_normal(16)
            v = rng.standard_normal(16)
            if np.abs(r - v).min() > margin:
                break
        _, grad = distill_l1(r, v)
        num = _fd_grad(lambda x: distill_l1(x, v)[0], r)
        errs["distill_l1"] = max(errs["distill_l1"], _rel_err(grad, num))
    return errs


@main.command()
@click.option("--keep", type=click.Path(), default=None,
              help="Directory to keep the generated corpus in.")
@click.pass_context
@_engine_errors
def selftest(ctx, keep):
    """Run the full pipeline on a small generated corpus and check recall."""
    from .synthetic import generate_corpus

    cfg = _config(ctx)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(keep) if keep else Path(tmp)
        corpus = root / "corpus"
        generate_corpus(corpus, n_images=8, n_proposals=40, n_entities=40,
                        n_predicates=12, num_super=6, dim=64,
                        seed=cfg.seed + 1)
        click.echo("corpus: generated 8 images [pass]")

        emb = load_embeddings(corpus / "entity_emb.bin", "binary")
        with open(corpus / "names.json", "r", encoding="utf-8") as fh:
            names = json.load(fh)
        smap = build_super_map(emb, len(names), names, seed=cfg.seed + 1)
        smap_path = root / "smap.json"
        smap.save(smap_path)
        click.echo(f"cluster: {smap.count} super entities [pass]")

        scores_dir = root / "scores"
        n = _run_scoring(corpus, smap_path, cfg, 1, scores_dir)
        scores2_dir = root / "scores2"
        _run_scoring(corpus, smap_path, cfg, 4, scores2_dir)
        same = all(
            (scores_dir / p.name).read_bytes() == p.read_bytes()
            for p in sorted(scores2_dir.iterdir())
        )
        if not same:
            click.echo("score: thread-count determinism [FAIL]")
            sys.exit(1)
        click.echo(f"score: {n} images, identical across thread counts [pass]")

        graphs_dir = root / "graphs"
        graphs_dir.mkdir(exist_ok=True)
        for d in _image_dirs(corpus):
            _infer_one_image(d, scores_dir, cfg, False, graphs_dir)
        report = _run_eval(graphs_dir, corpus / "gt.json",
                           corpus / "vocab.json", "predcls",
                           cfg.iou_thresh, (50, 100))
        r100 = report.splits["total"]["recall"]["100"]
        status = "pass" if r100 > 0.5 else "FAIL"
        click.echo(f"eval: total R@100={r100:.4f} on planted corpus [{status}]")
        if r100 <= 0.5:
            sys.exit(1)

        errs = _loss_check_report(20, cfg)
        worst = max(errs.values())
        status = "pass" if worst <= 1e-4 else "FAIL"
        click.echo(f"gradients: max relative error {worst:.3e} [{status}]")
        if worst > 1e-4:
            sys.exit(1)
    click.echo("selftest: all checks passed")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--smap", "smap_path", required=True,
              type=click.Path(exists=True))
@click.option("--alphas", default="0,0.25,1", show_default=True)
@click.option("--ks-select", default="1,3", show_default=True,
              help="Region-prompt selection sizes to sweep.")
@click.option("--protocol", type=click.Choice(["predcls", "sgdet"]),
              default="predcls", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@_engine_errors
def sweep(ctx, corpus, smap_path, alphas, ks_select, protocol, out):
    """Score + infer + eval over a grid of (alpha, k) configurations."""
    base = _config(ctx)
    corpus = Path(corpus)
    grid = [
        {"alpha": float(a), "k": int(k)}
        for a in alphas.split(",") for k in ks_select.split(",")
    ]
    reports = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, override in enumerate(grid):
            cfg = base.override(**override)
            scores_dir = Path(tmp) / f"scores{i}"
            graphs_dir = Path(tmp) / f"graphs{i}"
            graphs_dir.mkdir()
            _run_scoring(corpus, smap_path, cfg, 1, scores_dir)
            for d in _image_dirs(corpus):
                _infer_one_image(d, scores_dir, cfg, False, graphs_dir)
            report = _run_eval(graphs_dir, corpus / "gt.json",
                               corpus / "vocab.json", protocol,
                               cfg.iou_thresh, (50, 100))
            report.metadata.update({"override": override})
            reports.append(report.to_dict())
            r100 = report.splits["total"]["recall"]["100"]
            click.echo(f"alpha={override['alpha']} k={override['k']}: "
                       f"total R@100={r100:.4f}")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=1)
    click.echo(f"wrote {out}: {len(reports)} configurations")


if __name__ == "__main__":
    main()
