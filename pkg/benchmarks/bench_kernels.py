"""Compare the compiled and NumPy training kernels.

    python3 benchmarks/bench_kernels.py [--dim 64] [--entities 500] [--repeat 20]

Times one minibatch loss/gradient evaluation per backend and a short training
run on a synthetic graph, and checks that the backends agree.
"""

import argparse
import time

import numpy as np

from kbcpath import kernels, synth
from kbcpath.mining import doc_triples_from_records
from kbcpath.model import Hyperparams, init_params, loss_and_grads, sample_batch, train
from kbcpath.model import _PositiveIndex, _training_examples


def batch_for(g, dim, batch_size, neg_rate, rng):
    qe, qr, qc = _training_examples(g)
    pos = _PositiveIndex(qe, qr, qc, g.num_relations)
    idx = rng.choice(len(qe), batch_size, replace=False)
    n_neg = int(np.ceil(neg_rate * g.num_entities))
    return sample_batch(qe[idx], qr[idx], qc[idx], pos, g.num_entities, n_neg, dim, 0.5, rng)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--entities", type=int, default=500)
    ap.add_argument("--triples", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=2)
    args = ap.parse_args()

    cfg = synth.SynthConfig(seed=0, entities_per_type=args.entities // 5,
                            target_triples=args.triples)
    g, _ = doc_triples_from_records(synth.generate(cfg))
    rng = np.random.default_rng(0)
    params = init_params(g.num_entities, g.num_relations, args.dim, rng)
    batch = batch_for(g, args.dim, 128, 0.25, rng)
    backends = kernels.available_backends()
    print(f"graph: {g.num_entities} entities, {g.num_triples} triples; dim {args.dim}; "
          f"batch 128 x {batch.cand.shape[1]} candidates")
    if "compiled" not in backends:
        print("compiled kernel not built; only the python backend is available")

    ref = {}
    for b in backends:
        t = best_of(lambda: loss_and_grads(params, batch, 1e-4, b), args.repeat)
        ref[b] = loss_and_grads(params, batch, 1e-4, b)
        print(f"{b:>9} kernel: {t * 1e3:8.2f} ms / batch")
    if len(ref) == 2:
        (la, ga), (lb, gb) = ref["compiled"], ref["python"]
        diff = max(float(np.max(np.abs(ga[k] - gb[k]))) for k in ga)
        print(f"agreement: |loss diff| {abs(la - lb):.1e}, max |grad diff| {diff:.1e}")

    hp = Hyperparams(dim=args.dim, epochs=args.epochs, learning_rate=0.005, seed=0)
    for b in backends:
        t = time.perf_counter()
        train(g, hp, backend=b)
        print(f"{b:>9} train:  {(time.perf_counter() - t) / args.epochs:8.2f} s / epoch")


if __name__ == "__main__":
    main()
