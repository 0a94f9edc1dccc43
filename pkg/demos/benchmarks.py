"""Run the Monte Carlo studies at reduced size and print the summary tables.

The full-size studies run from the command line, e.g. ``gflsr bench sim1``.
"""

from gflsr.experiments import ExperimentConfig, run

for kind, kw in [("sim1", dict(reps=10)), ("sim2", dict(reps=10, n_grid=[100, 1000, 10000])),
                 ("sim3", dict(reps=20, n_grid=[1000])), ("sim4", dict(B=50))]:
    report = run(ExperimentConfig(kind, seed=0, workers=4, **kw))
    print(f"== {kind} (seed {report.seed}, {report.reps} reps)")
    for row in report.rows:
        if row["metric"].startswith(("d_u1", "s2_1", "b_corr1", "ci_", "pi")):
            print(f"  {row['config_id']:10s} n={row['n']:<6d} {row['noise']:10s} "
                  f"{row['metric']:10s} {row['mean']:.4g}  [{row['q025']:.3g}, {row['q975']:.3g}]")
