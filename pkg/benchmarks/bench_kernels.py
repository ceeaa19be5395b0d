"""Compare the compiled and numpy statevector kernels.

Times one ansatz application (the inner loop of every objective evaluation)
over a range of register widths, plus a full stage-1 gradient on tri3.

    python benchmarks/bench_kernels.py [--repeat 20] [--max-qubits 14]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from qtopo.ansatz import AnsatzConfig, build_ansatz
from qtopo.model import assemble, tri3
from qtopo.qsim import StateVector, apply, backend
from qtopo.vqa import TopologyVQA


def time_backend(which: str, fn, repeat: int) -> float:
    backend.set_backend(which)
    fn()  # warm up, compile the circuit
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--max-qubits", type=int, default=14)
    parser.add_argument("--layers", type=int, default=2)
    args = parser.parse_args(argv)

    names = backend.available()
    if "cython" not in names:
        print("compiled kernels are not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)

    print(f"{'case':<28}" + "".join(f"{n + ' (ms)':>16}" for n in names)
          + ("     speed-up" if len(names) == 2 else ""))
    cases = []
    for q in range(4, args.max_qubits + 1, 2):
        circuit = build_ansatz(AnsatzConfig(q, args.layers))
        params = rng.uniform(-np.pi, np.pi, circuit.num_params)
        cases.append((f"ansatz q={q} L={args.layers}",
                      lambda c=circuit, p=params, q=q: apply(StateVector(q), c, p)))
    vqa = TopologyVQA(assemble(tri3()))
    theta = rng.uniform(-np.pi, np.pi, vqa.prep.num_theta)
    cases.append(("tri3 F_u gradient", lambda: vqa.grad_f_u(theta)))

    for label, fn in cases:
        times = {n: time_backend(n, fn, args.repeat) * 1e3 for n in names}
        row = f"{label:<28}" + "".join(f"{times[n]:16.3f}" for n in names)
        if len(names) == 2:
            row += f"{times['python'] / times['cython']:12.1f}x"
        print(row)
    backend.set_backend(names[0])


if __name__ == "__main__":
    main()
