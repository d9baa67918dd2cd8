"""Command-line entry point chaining the pipeline stages.

Subcommands: ingest, pool, train, parse, chunk, index, retrieve, eval,
synth, pipeline. Exit codes: 0 ok, 1 usage, 2 data error, 3 internal. Every
run writes a manifest (resolved config + input hashes) next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, treeio
from .blocks import (
    ROOT,
    Document,
    build_canvas,
    document_from_dict,
    document_to_dict,
    read_detection_stream,
    read_documents,
    shared_det_filter,
)
from .chunking import chunk_document, write_chunks, read_chunk_store
from .config import DEFAULTS, load_config, write_manifest
from .errors import DataError
from .metrics import parent_f1, resolve_judgments, retrieval_metrics, steds
from .parsing.candidates import build_candidates
from .parsing.decode import argmax_as_tree, decode_argmax, decode_mst
from .parsing.head import HeadParams, score_document
from .parsing.trainer import TrainConfig, train
from .retrieval import bm25_search, build_index, dense_search, load_index, save_index
from .softroi import TypeEmbeddingTable, embed_document, read_embeddings, read_grids, write_embeddings, write_grids
from .synth import SynthConfig, generate_corpus


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; the contract says 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# per-document workers (top-level so they pickle for --jobs > 1)

_PARAMS_CACHE: dict[str, HeadParams] = {}


def _load_params(path: str) -> HeadParams:
    if path not in _PARAMS_CACHE:
        _PARAMS_CACHE[path] = HeadParams.load(path)
    return _PARAMS_CACHE[path]


def _parse_one(task: tuple[str, str, str, dict]) -> str:
    doc_json, emb_path, params_path, cfg = task
    doc = document_from_dict(json.loads(doc_json))
    with open(emb_path) as fh:
        embeddings = read_embeddings(fh)
    params = _load_params(params_path)
    cands = build_candidates(
        doc,
        k=cfg["top_k"],
        m_pages=cfg["m_pages"],
        y_tol=cfg["y_tol"],
        header_bonus={} if cfg["no_header_prior"] else None,
    )
    scored = score_document(doc, embeddings, cands, params, m_pages=cfg["m_pages"])
    edges = [
        (sc.child, cand, float(s))
        for sc in scored
        for cand, s in zip(sc.candidates, sc.scores)
    ]
    if cfg["decode"] == "argmax":
        parent_map, report = decode_argmax(edges)
        parent = argmax_as_tree(parent_map, report).parent
        extra = {"decode": "argmax", "cycle_count": report.cycle_count}
    else:
        parent = decode_mst(edges).parent
        extra = {"decode": "mst"}
    score_of = {(c, p): s for c, p, s in edges}
    obj = treeio.tree_to_dict(doc.doc_id, parent, {c: score_of[(c, p)] for c, p in parent.items()})
    obj.update(extra)
    return json.dumps(obj)


def _chunk_one(task: tuple[str, str, int, bool]) -> str:
    doc_json, tree_json, max_len, no_metadata = task
    doc = document_from_dict(json.loads(doc_json))
    _, parent = treeio.tree_from_dict(json.loads(tree_json))
    from .parsing.decode import DependencyTree

    chunks = chunk_document(DependencyTree(parent=parent), doc, max_len=max_len)
    import io

    buf = io.StringIO()
    write_chunks(doc, chunks, buf, include_metadata=not no_metadata)
    return buf.getvalue()


def _map_ordered(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, cfg) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grids").mkdir(exist_ok=True)
    scfg = SynthConfig(
        seed=args.seed,
        n_docs=args.n_docs,
        figure_rate=args.figure_rate,
        embedding_dim=args.embedding_dim,
        signal_strength=args.signal_strength,
        grid_size=args.grid_size,
        questions_per_doc=args.questions_per_doc,
        blocks_per_page=args.blocks_per_page,
    )
    docs = generate_corpus(scfg)
    with open(out / "blocks.jsonl", "w") as fh:
        for sd in docs:
            fh.write(json.dumps(document_to_dict(sd.document), ensure_ascii=False) + "\n")
    for sd in docs:
        with open(out / "grids" / f"{sd.document.doc_id}.jsonl", "w") as fh:
            write_grids(sd.grids, fh)
    with open(out / "gold_trees.jsonl", "w") as fh:
        treeio.write_trees((treeio.tree_to_dict(sd.document.doc_id, sd.gold) for sd in docs), fh)
    with open(out / "queries.jsonl", "w") as fh:
        for sd in docs:
            for q in sd.queries:
                fh.write(json.dumps(q) + "\n")
    with open(out / "judgments.jsonl", "w") as fh:
        for sd in docs:
            for j in sd.judgments:
                fh.write(json.dumps(j) + "\n")
    write_manifest(out / "manifest.json", "synth", cfg, [])
    return 0


def cmd_ingest(args, cfg) -> int:
    docs = []
    for path in args.dets:
        with open(path) as fh:
            doc_id, page_sizes, dets = read_detection_stream(fh)
        kept = shared_det_filter(
            dets, tau_det=cfg["ingest.tau_det"], tau_nms=cfg["ingest.tau_nms"], k_max=cfg["ingest.k_max"]
        )
        docs.append(build_canvas(doc_id, page_sizes, kept))
    with open(args.out, "w") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "ingest", cfg, args.dets)
    return 0


def _load_blocks(path: str) -> list[Document]:
    with open(path) as fh:
        return read_documents(fh)


def cmd_pool(args, cfg) -> int:
    docs = _load_blocks(args.blocks)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.params:
        table = _load_params(args.params).table
    else:
        table = TypeEmbeddingTable.init(dim=cfg["train.type_dim"], seed=cfg["train.seed"])
    for doc in docs:
        with open(Path(args.grids_dir) / f"{doc.doc_id}.jsonl") as fh:
            grids = read_grids(fh)
        embs = embed_document(doc, grids, alpha=cfg["pool.alpha"], table=table)
        with open(out / f"{doc.doc_id}.jsonl", "w") as fh:
            write_embeddings(embs, fh)
    write_manifest(out / "manifest.json", "pool", cfg, [args.blocks])
    return 0


def _load_training_corpus(blocks_path: str, emb_dir: str, gold_path: str):
    docs = _load_blocks(blocks_path)
    with open(gold_path) as fh:
        gold = treeio.read_trees(fh)
    corpus = []
    for doc in docs:
        with open(Path(emb_dir) / f"{doc.doc_id}.jsonl") as fh:
            embs = read_embeddings(fh)
        corpus.append((doc, embs, gold[doc.doc_id]))
    return corpus


def cmd_train(args, cfg) -> int:
    corpus = _load_training_corpus(args.blocks, args.embeddings_dir, args.gold)
    tcfg = TrainConfig(
        seed=cfg["train.seed"],
        lr=cfg["train.lr"],
        epochs=cfg["train.epochs"],
        batch_size=cfg["train.batch_size"],
        weight_decay=cfg["train.weight_decay"],
        dropout=cfg["train.dropout"],
        val_fraction=cfg["train.val_fraction"],
        hidden=cfg["train.hidden"],
        type_dim=cfg["train.type_dim"],
    )
    bonus = {} if cfg["parse.no_header_prior"] else None

    def cand_fn(doc):
        return build_candidates(
            doc, k=cfg["parse.top_k"], m_pages=cfg["parse.m_pages"], y_tol=cfg["parse.y_tol"], header_bonus=bonus
        )

    log = []
    params = train(corpus, tcfg, cand_fn, m_pages=cfg["parse.m_pages"], log=log)
    params.save(args.out)
    for entry in log:
        print(f"epoch={entry.epoch} loss={entry.loss:.6f} val_accuracy={entry.val_accuracy:.4f}")
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "train", cfg, [args.blocks, args.gold])
    return 0


def cmd_parse(args, cfg) -> int:
    docs = _load_blocks(args.blocks)
    pcfg = {
        "top_k": cfg["parse.top_k"],
        "m_pages": cfg["parse.m_pages"],
        "y_tol": cfg["parse.y_tol"],
        "no_header_prior": cfg["parse.no_header_prior"],
        "decode": cfg["parse.decode"],
    }
    tasks = [
        (
            json.dumps(document_to_dict(doc)),
            str(Path(args.embeddings_dir) / f"{doc.doc_id}.jsonl"),
            args.params,
            pcfg,
        )
        for doc in docs
    ]
    lines = _map_ordered(_parse_one, tasks, cfg["pipeline.jobs"])
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "parse", cfg, [args.blocks, args.params])
    return 0


def cmd_chunk(args, cfg) -> int:
    docs = _load_blocks(args.blocks)
    with open(args.trees) as fh:
        tree_lines = {json.loads(line)["doc_id"]: line.strip() for line in fh if line.strip()}
    tasks = [
        (json.dumps(document_to_dict(doc)), tree_lines[doc.doc_id], cfg["chunk.max_len"], cfg["chunk.no_metadata"])
        for doc in docs
    ]
    outputs = _map_ordered(_chunk_one, tasks, cfg["pipeline.jobs"])
    with open(args.out, "w") as fh:
        fh.write("".join(outputs))
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "chunk", cfg, [args.blocks, args.trees])
    return 0


def cmd_index(args, cfg) -> int:
    with open(args.chunks) as fh:
        records = read_chunk_store(fh)
    dense = None
    if args.dense:
        dense = {}
        with open(args.dense) as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    dense[obj["chunk_id"]] = obj["vector"]
    index = build_index([(r["chunk_id"], r["text"]) for r in records], dense=dense)
    save_index(index, args.out)
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "index", cfg, [args.chunks])
    return 0


def cmd_retrieve(args, cfg) -> int:
    index = load_index(args.index)
    results = []
    with open(args.queries) as fh:
        for line in fh:
            if not line.strip():
                continue
            q = json.loads(line)
            if cfg["retrieve.retriever"] == "dense":
                ranking = dense_search(index, np.asarray(q["vector"], dtype=np.float64), cfg["retrieve.k"])
            else:
                ranking = bm25_search(index, q["text"], cfg["retrieve.k"])
            results.append({"query_id": q["query_id"], "ranking": [[cid, s] for cid, s in ranking]})
    with open(args.out, "w") as fh:
        for r in results:
            fh.write(json.dumps(r) + "\n")
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "retrieve", cfg, [args.index, args.queries])
    return 0


def cmd_eval(args, cfg) -> int:
    report: dict = {"k": cfg["retrieve.k"]}
    if args.trees and args.gold:
        with open(args.trees) as fh:
            pred = treeio.read_trees(fh)
        with open(args.gold) as fh:
            gold = treeio.read_trees(fh)
        f1s, steds_vals = [], []
        for doc_id in sorted(gold):
            f1s.append(parent_f1(pred[doc_id], gold[doc_id]))
            steds_vals.append(steds(pred[doc_id], gold[doc_id]))
        report["parent_f1"] = sum(f1s) / len(f1s) if f1s else 1.0
        report["steds"] = sum(steds_vals) / len(steds_vals) if steds_vals else 1.0
        report["n_documents"] = len(f1s)
    if args.results and args.judgments and args.chunks:
        with open(args.chunks) as fh:
            chunk_texts = {r["chunk_id"]: r["text"] for r in read_chunk_store(fh)}
        with open(args.judgments) as fh:
            raw = [json.loads(line) for line in fh if line.strip()]
        judgments, _ = resolve_judgments(raw, chunk_texts)
        with open(args.results) as fh:
            rankings = {
                obj["query_id"]: [cid for cid, _ in obj["ranking"]]
                for obj in (json.loads(line) for line in fh if line.strip())
            }
        rep = retrieval_metrics(rankings, judgments, cfg["retrieve.k"])
        report["retrieval"] = {
            "precision": rep.precision,
            "recall": rep.recall,
            "ndcg": rep.ndcg,
            "n_queries": rep.n_queries,
            "n_skipped": rep.n_skipped,
        }
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for key in ("parent_f1", "steds"):
        if key in report:
            print(f"{key:12s} {report[key]:.4f}")
    if "retrieval" in report:
        r = report["retrieval"]
        print(f"P@{report['k']}          {r['precision']:.4f}")
        print(f"R@{report['k']}          {r['recall']:.4f}")
        print(f"nDCG@{report['k']}       {r['ndcg']:.4f}")
    return 0


def cmd_pipeline(args, cfg) -> int:
    indir = Path(args.indir)
    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    blocks = indir / "blocks.jsonl"
    ns = argparse.Namespace

    cmd_pool(
        ns(blocks=str(blocks), grids_dir=str(indir / "grids"), out_dir=str(work / "embeddings"), params=args.params),
        cfg,
    )
    params_path = args.params
    if params_path is None:
        # untrained seeded head: the smoke path needs no checkpoint
        docs = _load_blocks(str(blocks))
        with open(Path(work / "embeddings") / f"{docs[0].doc_id}.jsonl") as fh:
            dim = len(read_embeddings(fh)[0].e)
        params = HeadParams.init(dim, type_dim=cfg["train.type_dim"], hidden=cfg["train.hidden"], seed=cfg["train.seed"])
        params_path = str(work / "params.json")
        params.save(params_path)
    cmd_parse(
        ns(blocks=str(blocks), embeddings_dir=str(work / "embeddings"), params=params_path, out=str(work / "trees.jsonl")),
        cfg,
    )
    cmd_chunk(ns(blocks=str(blocks), trees=str(work / "trees.jsonl"), out=str(work / "chunks.jsonl")), cfg)
    cmd_index(ns(chunks=str(work / "chunks.jsonl"), out=str(work / "index.json"), dense=None), cfg)
    queries = indir / "queries.jsonl"
    if queries.is_file():
        cmd_retrieve(ns(index=str(work / "index.json"), queries=str(queries), out=str(work / "results.jsonl")), cfg)
    gold = indir / "gold_trees.jsonl"
    judgments = indir / "judgments.jsonl"
    cmd_eval(
        ns(
            trees=str(work / "trees.jsonl"),
            gold=str(gold) if gold.is_file() else None,
            results=str(work / "results.jsonl") if queries.is_file() else None,
            judgments=str(judgments) if judgments.is_file() else None,
            chunks=str(work / "chunks.jsonl"),
            out=str(work / "report.json"),
        ),
        cfg,
    )
    write_manifest(work / "manifest.json", "pipeline", cfg, [blocks])
    return 0


# ---------------------------------------------------------------------------


def _add_cfg_flag(p: _Parser, flag: str, key: str, **kw) -> None:
    p.add_argument(flag, dest=f"cfg:{key}", default=None, **kw)


def build_parser() -> _Parser:
    p = _Parser(prog="docdep", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", default=None, help="key=value config file")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-docs", type=int, default=10)
    sp.add_argument("--figure-rate", type=float, default=0.25)
    sp.add_argument("--embedding-dim", type=int, default=16)
    sp.add_argument("--signal-strength", type=float, default=0.8)
    sp.add_argument("--grid-size", type=int, default=16)
    sp.add_argument("--questions-per-doc", type=int, default=2)
    sp.add_argument("--blocks-per-page", type=int, default=5)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("ingest", help="filter raw detections into global blocks")
    sp.add_argument("--dets", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    _add_cfg_flag(sp, "--tau-det", "ingest.tau_det", type=float)
    _add_cfg_flag(sp, "--tau-nms", "ingest.tau_nms", type=float)
    _add_cfg_flag(sp, "--k-max", "ingest.k_max", type=int)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("pool", help="pool token grids into block embeddings")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--grids-dir", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--params", default=None, help="checkpoint providing the type table")
    _add_cfg_flag(sp, "--alpha", "pool.alpha", type=float)
    sp.set_defaults(func=cmd_pool)

    sp = sub.add_parser("train", help="train the edge-scoring head")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--embeddings-dir", required=True)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--out", required=True)
    _add_cfg_flag(sp, "--seed", "train.seed", type=int)
    _add_cfg_flag(sp, "--lr", "train.lr", type=float)
    _add_cfg_flag(sp, "--epochs", "train.epochs", type=int)
    _add_cfg_flag(sp, "--batch-size", "train.batch_size", type=int)
    _add_cfg_flag(sp, "--weight-decay", "train.weight_decay", type=float)
    _add_cfg_flag(sp, "--dropout", "train.dropout", type=float)
    _add_cfg_flag(sp, "--hidden", "train.hidden", type=int)
    _add_cfg_flag(sp, "--top-k", "parse.top_k", type=int)
    _add_cfg_flag(sp, "--m-pages", "parse.m_pages", type=int)
    _add_cfg_flag(sp, "--no-header-prior", "parse.no_header_prior", action="store_const", const="true")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("parse", help="score edges and decode dependency trees")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--embeddings-dir", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--out", required=True)
    _add_cfg_flag(sp, "--decode", "parse.decode", choices=["mst", "argmax"])
    _add_cfg_flag(sp, "--top-k", "parse.top_k", type=int)
    _add_cfg_flag(sp, "--m-pages", "parse.m_pages", type=int)
    _add_cfg_flag(sp, "--y-tol", "parse.y_tol", type=float)
    _add_cfg_flag(sp, "--no-header-prior", "parse.no_header_prior", action="store_const", const="true")
    _add_cfg_flag(sp, "--jobs", "pipeline.jobs", type=int)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("chunk", help="convert trees into retrieval chunks")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--trees", required=True)
    sp.add_argument("--out", required=True)
    _add_cfg_flag(sp, "--max-len", "chunk.max_len", type=int)
    _add_cfg_flag(sp, "--no-metadata", "chunk.no_metadata", action="store_const", const="true")
    _add_cfg_flag(sp, "--jobs", "pipeline.jobs", type=int)
    sp.set_defaults(func=cmd_chunk)

    sp = sub.add_parser("index", help="build the corpus-level chunk index")
    sp.add_argument("--chunks", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dense", default=None, help="JSONL of {chunk_id, vector}")
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("retrieve", help="answer queries against an index")
    sp.add_argument("--index", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--out", required=True)
    _add_cfg_flag(sp, "--retriever", "retrieve.retriever", choices=["bm25", "dense"])
    _add_cfg_flag(sp, "--k", "retrieve.k", type=int)
    sp.set_defaults(func=cmd_retrieve)

    sp = sub.add_parser("eval", help="tree and retrieval metrics")
    sp.add_argument("--trees", default=None)
    sp.add_argument("--gold", default=None)
    sp.add_argument("--results", default=None)
    sp.add_argument("--judgments", default=None)
    sp.add_argument("--chunks", default=None)
    sp.add_argument("--out", required=True)
    _add_cfg_flag(sp, "--k", "retrieve.k", type=int)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("pipeline", help="pool -> parse -> chunk -> index -> retrieve -> eval")
    sp.add_argument("--in", dest="indir", required=True)
    sp.add_argument("--workdir", required=True)
    sp.add_argument("--params", default=None)
    _add_cfg_flag(sp, "--decode", "parse.decode", choices=["mst", "argmax"])
    _add_cfg_flag(sp, "--top-k", "parse.top_k", type=int)
    _add_cfg_flag(sp, "--m-pages", "parse.m_pages", type=int)
    _add_cfg_flag(sp, "--alpha", "pool.alpha", type=float)
    _add_cfg_flag(sp, "--max-len", "chunk.max_len", type=int)
    _add_cfg_flag(sp, "--no-metadata", "chunk.no_metadata", action="store_const", const="true")
    _add_cfg_flag(sp, "--no-header-prior", "parse.no_header_prior", action="store_const", const="true")
    _add_cfg_flag(sp, "--retriever", "retrieve.retriever", choices=["bm25", "dense"])
    _add_cfg_flag(sp, "--k", "retrieve.k", type=int)
    _add_cfg_flag(sp, "--jobs", "pipeline.jobs", type=int)
    sp.set_defaults(func=cmd_pipeline)

    return p


def _resolve_config(args) -> dict[str, object]:
    from .config import _coerce

    cfg = load_config(args.config)
    for name, value in vars(args).items():
        if name.startswith("cfg:") and value is not None:
            key = name[4:]
            cfg[key] = _coerce(key, str(value)) if isinstance(value, str) else value
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve_config(args)
        return args.func(args, cfg)
    except SystemExit as e:
        return int(e.code or 0)
    except DataError as e:
        return _fail(type(e).__name__, str(e), 2)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        return _fail(type(e).__name__, str(e), 3)


if __name__ == "__main__":
    sys.exit(main())
