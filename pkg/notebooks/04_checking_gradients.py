"""Trusting the hand-written derivatives.

Every operation and every loss carries an analytic backward pass. The
checker compares them entry by entry against central differences of the
forward pass, run in extended precision so entries whose true gradient is
exactly zero (shift-invariant losses make several) are not lost in float64
roundoff.

Run:  python notebooks/04_checking_gradients.py
"""

from ctxrank.harness import format_gradcheck, run_gradcheck

reports = run_gradcheck(["ndcgloss2pp", "listmle"])
print(format_gradcheck(reports))

# The negative control: scale the analytic gradient by 1% and watch it fail.
corrupted = run_gradcheck(["ranknet"], corrupt=True)
print()
print(format_gradcheck(corrupted).splitlines()[0])
