"""Quick end-to-end check of the Python bindings.

Build first, e.g. `maturin develop -m crates/wtq-py/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import cmath
import math
from fractions import Fraction

import wtq


def main():
    assert wtq.residue_count() == (99, 72, 72)
    assert len(wtq.parity_permutations()) == 12
    assert [len(wtq.enumerate_trees(n)) for n in range(4)] == [1, 1, 5, 35]

    d = wtq.discontinuity()
    assert abs(d["ratio"] - 9.0) < 1e-12

    # single frequency: (e^{iωt} - 1) / (iω)
    w, t = Fraction(3, 4), 1.3
    want = (cmath.exp(1j * float(w) * t) - 1) / (1j * float(w))
    assert abs(wtq.g_m([w], t) - want) < 1e-14
    assert abs(wtq.g_m(["1/2", -1, 2], 2.0) - wtq.g_m_oracle(["1/2", -1, 2], 2.0)) < 1e-9
    assert wtq.classify_leading([-1, 1, -2, 2]) == ("EvenResonantChain", 2)

    params = wtq.RegimeParams(2, mu=4.0, nu=4.0)
    prof = wtq.Profile(1.0)
    assert wtq.tree_vs_picard(1, 0, 0.5, params, prof) < 1e-10

    p8 = wtq.RegimeParams(8, mu=4.0, nu=4.0)
    h = 1e-4
    fd = (wtq.mass(1, 0, 1.0 + h, p8, prof) - wtq.mass(1, 0, 1.0 - h, p8, prof)) / (2 * h)
    exact = wtq.mass_derivative_n1(0, 1.0, p8, prof)
    assert abs(fd - exact) <= 1e-6 * abs(exact)

    rep = wtq.regime_check(0.4, 0.3, 0.05, 0.2)
    assert rep["all_pass"]

    try:
        wtq.RegimeParams(0, 4.0, 4.0)
    except ValueError:
        pass
    else:
        raise AssertionError("L = 0 must be rejected")

    v = wtq.i_l_pairing("1/2", 8, 8.0, 8.0, wtq.Profile(0.5), prof, prof)
    assert math.isfinite(v) and v > 0
    print("wtq", wtq.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
