"""Out-of-sample reliability of robust certificates.

Repeatedly: simulate a small training fleet from a known kernel, fit, solve
at every radius on a grid, then ask whether the in-sample guarantee survives
contact with the truth.  Nominal planning (psi = 0) is overconfident;
modest ambiguity buys reliability at some cost in certified value.

Writes reliability.svg and values.svg next to this script.
"""

from pathlib import Path

from remplan.experiments import ExperimentConfig, impact_experiment
from remplan.model import ModelSpec
from remplan.plots import line_chart
from remplan.synthetic import geometric_ifr_slice

model = ModelSpec.from_affine(7, 10, 3.0, 0.5, 0.5, 2.0, 0.5, 0.9)
truth = geometric_ifr_slice(7, 0.3)

cfg = ExperimentConfig(family="kl", psi_grid=(0.0, 0.25, 0.5, 1.0, 2.0),
                       train_size=5, test_size=50, replications=100,
                       eval_mode="truth", k_max=10, seed=29, threads=4)
report = impact_experiment(model, cfg, true_kernel=truth)

print("psi    in-sample  out-of-sample  reliability")
for psi in cfg.psi_grid:
    print(f"{psi:4.2f}  {report.mean_in_sample(psi):9.3f}  "
          f"{report.mean_out_of_sample(psi):13.3f}  "
          f"{report.reliability(psi):11.2f}")

here = Path(__file__).resolve().parent
grid = list(cfg.psi_grid)
line_chart([("reliability", grid, [report.reliability(p) for p in grid])],
           here / "reliability.svg", title="Certificate reliability vs psi",
           x_label="psi", y_label="fraction of replications")
line_chart([("in-sample", grid, [report.mean_in_sample(p) for p in grid]),
            ("out-of-sample", grid,
             [report.mean_out_of_sample(p) for p in grid])],
           here / "values.svg", title="Certified vs realized value",
           x_label="psi", y_label="value of a new unit")
print(f"wrote {here / 'reliability.svg'} and {here / 'values.svg'}")
