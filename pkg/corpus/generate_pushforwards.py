"""Regenerate the conjugated corpus pairs.

Each pair is (Phi_* F, Phi_* L) with Phi the time-one flow of a vector field
of valuation 2, truncated at total degree 20.

    python3 corpus/generate_pushforwards.py
"""
from pathlib import Path

from foliation_lab.cli.grammar import format_oneform, parse_oneform
from foliation_lab.flows import VectorField, exp_flow
from foliation_lab.series import TruncSeries2

DEGREE = 20
HERE = Path(__file__).resolve().parent
PAIRS = [("homogeneous1", "fib_homog"), ("homogeneous2", "fib_homog"), ("logform", "fib_log")]


def conjugator(order):
    x, y = TruncSeries2.x(order), TruncSeries2.y(order)
    field = VectorField((x * x).scale(0.3) + (x * y).scale(0.2),
                        (y * y).scale(0.25) - (x * y).scale(0.1))
    return exp_flow(1.0, field, order)


def main():
    phi = conjugator(DEGREE)
    for fol, fib in PAIRS:
        for name in (fol, fib):
            out = HERE / f"{name}_pushed.txt"
            if name == fib and out.exists():
                continue
            form = parse_oneform((HERE / f"{name}.txt").read_text()).truncate(DEGREE)
            pushed = phi.push_forward(form)
            out.write_text(f"# push-forward of {name}.txt by the time-one flow of\n"
                           f"# (0.3 x^2 + 0.2 x y) d/dx + (0.25 y^2 - 0.1 x y) d/dy, degree <= {DEGREE}\n"
                           + format_oneform(pushed) + "\n")
            print("wrote", out.name)


if __name__ == "__main__":
    main()
