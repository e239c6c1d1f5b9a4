"""Regenerate the multi-precision oracle for the sharp-constant family.

Run from the repository root:

    python tests/make_constants_oracle.py

Writes ``tests/fixtures/sharp_constants_oracle.json``.  The sharp constants
are assembled here from scratch with mpmath at 40 significant digits, so the
fixture is an independent check on the lgamma-based evaluation in the
package.  mpmath is needed only for this script, not by the package.
"""

from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

# same pairs the acceptance tests exercise
PAIRS = [(3, 1.0), (3, 2.0), (4, 2.0), (5, 3.0)]

OUT = Path(__file__).parent / "fixtures" / "sharp_constants_oracle.json"


def sphere_measure(k: int) -> mp.mpf:
    """Surface measure of S^k embedded in R^(k+1)."""
    return 2 * mp.pi ** (mp.mpf(k + 1) / 2) / mp.gamma(mp.mpf(k + 1) / 2)


def oracle_case(n: int, alpha: float) -> dict:
    a = mp.mpf(alpha)
    nn = mp.mpf(n)

    h_n = (mp.pi ** ((nn - a) / 2)
           * mp.gamma(a / 2) / mp.gamma((nn + a) / 2)
           * mp.gamma(nn) ** (1 - (nn - a) / nn)
           * mp.gamma(nn / 2) ** ((nn - a) / nn - 1))

    omega_n = sphere_measure(n)
    s_n = mp.sqrt(4 / (nn * (nn - 2) * omega_n ** (mp.mpf(2) / nn)))

    k_n = s_n * h_n ** ((2 - nn) / (nn + a))

    c_n = (s_n ** ((nn - a) * (2 - nn) / (4 * (nn - a + 2)))
           * k_n ** ((2 - nn) / (2 * (nn - a + 2)))
           * (nn * (nn - 2)) ** ((nn - 2) / 4))

    def s(x: mp.mpf) -> str:
        return mp.nstr(x, 32)

    return {
        "n": n,
        "alpha": alpha,
        "p": s((nn + a) / (nn - 2)),
        "s_n": s(s_n),
        "h_n": s(h_n),
        "k_n": s(k_n),
        "c_n": s(c_n),
        "omega": s(sphere_measure(n - 1)),
        "omega_n": s(omega_n),
        "omega_n_minus_2": s(sphere_measure(n - 2)),
    }


def main() -> None:
    payload = {
        "digits": mp.mp.dps,
        "cases": [oracle_case(n, alpha) for n, alpha in PAIRS],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} ({len(payload['cases'])} cases at {mp.mp.dps} digits)")


if __name__ == "__main__":
    main()
