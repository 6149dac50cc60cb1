"""Compare the compiled and numpy ragged-kernel backends.

Micro-benchmarks the four segment kernels on retail-scale shapes (12k items,
128-wide embeddings, price nodes fanning out to ~1.2k neighbors) and then a
full encoder forward+backward on a synthetic graph of the same size.

Usage: python benchmarks/bench_kernels.py [--items 12150] [--d 128] [--repeats 5]
"""

import argparse
import time

import numpy as np

from bdhh.dataio import Basket, Vocabulary
from bdhh.encoder import encode_graph, encode_graph_backward
from bdhh.hypergraph import FEATURE_ORDER, build_hypergraph
from bdhh.kernels import get_backend
from bdhh.model import encoder_view, init_params, tables_view
from bdhh.objective import HyperParams


def synthetic_vocab(rng, n_items, n_levels, n_categories):
    item_ids = [f"i{code:05d}" for code in range(n_items)]
    labels = [f"c{code:03d}" for code in range(n_categories)]
    return Vocabulary(
        item_index={item: code for code, item in enumerate(item_ids)},
        category_index={label: code for code, label in enumerate(labels)},
        n_levels=n_levels,
        item_level=rng.integers(0, n_levels, size=n_items),
        item_category=rng.integers(0, n_categories, size=n_items),
        item_ids=item_ids,
        category_labels=labels,
    )


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def ragged_instance(rng, n_segments, mean_len, table_rows, d):
    lengths = rng.poisson(mean_len, size=n_segments)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    n = int(offsets[-1])
    return {
        "offsets": offsets,
        "logits": rng.normal(size=n),
        "weights": rng.uniform(0.1, 1.0, size=n),
        "indices": rng.integers(0, table_rows, size=n).astype(np.int64),
        "table": rng.normal(size=(table_rows, d)),
        "grad_out": rng.normal(size=(n_segments, d)),
    }


def bench_kernels(args, backends):
    rng = np.random.default_rng(0)
    inst = ragged_instance(rng, n_segments=args.items, mean_len=8, table_rows=args.items, d=args.d)
    rows = []
    cases = {
        "segment_softmax": lambda impl: impl.segment_softmax(inst["logits"], inst["offsets"]),
        "segment_softmax_grad": lambda impl: impl.segment_softmax_grad(
            inst["weights"], inst["logits"], inst["offsets"]
        ),
        "segment_weighted_sum": lambda impl: impl.segment_weighted_sum(
            inst["weights"], inst["indices"], inst["table"], inst["offsets"]
        ),
        "segment_weighted_sum_grad": lambda impl: impl.segment_weighted_sum_grad(
            inst["grad_out"], inst["weights"], inst["indices"], inst["table"],
            inst["offsets"], np.zeros_like(inst["table"]),
        ),
    }
    for name, call in cases.items():
        times = {b: timeit(lambda b=b: call(backends[b]), args.repeats) for b in backends}
        rows.append((name, times))
    return rows


def synthetic_graph(args, rng):
    vocab = synthetic_vocab(rng, args.items, n_levels=10, n_categories=235)
    baskets = []
    for user in range(200):
        for seq in range(5):
            codes = sorted(int(c) for c in rng.choice(args.items, size=10, replace=False))
            items = tuple(
                (c, int(vocab.item_level[c]), int(vocab.item_category[c])) for c in codes
            )
            baskets.append(Basket(user=user, seq_index=seq, day=seq, items=items))
    return vocab, build_hypergraph(baskets, vocab)


def bench_encoder(args, backends):
    import bdhh.encoder as encoder_module

    rng = np.random.default_rng(1)
    vocab, graph = synthetic_graph(args, rng)
    hp = HyperParams(d=args.d, heads=4, max_seq_len=50)
    params = init_params(hp, vocab, rng)
    grad_h = {t: rng.normal(size=(graph.size_of(t), args.d)) for t in FEATURE_ORDER}
    for t in FEATURE_ORDER:  # warm the CSR caches out of the timed region
        for other in FEATURE_ORDER:
            if t != other:
                graph.neighbor_csr(t, other)

    times = {}
    for name, impl in backends.items():
        saved = encoder_module.kernels
        encoder_module.kernels = impl
        try:
            def run():
                _, cache = encode_graph(
                    graph, tables_view(params), encoder_view(params), with_cache=True
                )
                encode_graph_backward(cache, grad_h)

            times[name] = timeit(run, args.repeats)
        finally:
            encoder_module.kernels = saved
    return times


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--items", type=int, default=12150)
    parser.add_argument("--d", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = {"numpy": get_backend("numpy")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled backend not built; run pip install -e . --no-build-isolation")

    print(f"shapes: {args.items} segments/rows, d={args.d}, best of {args.repeats}\n")
    header = f"{'kernel':34s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, times in bench_kernels(args, backends):
        line = f"{name:34s}" + "".join(f"{times[b] * 1e3:9.2f} ms" for b in backends)
        if len(backends) == 2:
            line += f"{times['numpy'] / times['cython']:9.1f}x"
        print(line)

    times = bench_encoder(args, backends)
    line = f"{'full encoder fwd+bwd':34s}" + "".join(f"{times[b] * 1e3:9.2f} ms" for b in backends)
    if len(backends) == 2:
        line += f"{times['numpy'] / times['cython']:9.1f}x"
    print(line)


if __name__ == "__main__":
    main()
