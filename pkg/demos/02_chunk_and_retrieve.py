"""Walkthrough: turn a dependency tree into chunks and query them with BM25.

    python3 demos/02_chunk_and_retrieve.py

Shows the serialized chunk template (section path, pages line, figure
markers) and compares tree-guided chunks against the structure-blind
fixed-length baseline on the planted questions.
"""

from docdep.chunking import chunk_document, length_chunks, serialize_chunk
from docdep.metrics import resolve_judgments, retrieval_metrics
from docdep.parsing import DependencyTree
from docdep.retrieval import bm25_search, build_index
from docdep.synth import SynthConfig, generate_corpus


def index_for(docs, tree_guided):
    texts = {}
    for sd in docs:
        if tree_guided:
            chunks = chunk_document(DependencyTree(parent=sd.gold), sd.document)
        else:
            chunks = length_chunks(sd.document)
        for c in chunks:
            texts[c.chunk_id] = serialize_chunk(c, sd.document).text
    return build_index(sorted(texts.items())), texts


def main():
    docs = generate_corpus(SynthConfig(seed=3, n_docs=12))

    sd = docs[0]
    chunks = chunk_document(DependencyTree(parent=sd.gold), sd.document)
    print(f"{sd.document.doc_id}: {len(sd.document.blocks)} blocks -> {len(chunks)} chunks\n")
    for c in chunks[:3]:
        sc = serialize_chunk(c, sd.document)
        print(f"--- {c.chunk_id} ({c.kind.value}, {sc.token_count} tokens) ---")
        print(sc.text[:400])
        print()

    for guided in (True, False):
        index, texts = index_for(docs, guided)
        judgments, _ = resolve_judgments([j for sd in docs for j in sd.judgments], texts)
        rankings = {
            q["query_id"]: [cid for cid, _ in bm25_search(index, q["text"], k=4)]
            for sd in docs
            for q in sd.queries
        }
        rep = retrieval_metrics(rankings, judgments, k=4)
        label = "tree-guided" if guided else "length-baseline"
        print(f"{label:16s} R@4={rep.recall:.3f} nDCG@4={rep.ndcg:.3f} ({rep.n_queries} queries)")


if __name__ == "__main__":
    main()
