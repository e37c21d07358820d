use crate::run::Command;

const HEADER: &str = "\
#!/usr/bin/env python3
# Quick-look plots for a kaefam bundle. Run from inside the bundle directory.
import csv
import math

import matplotlib.pyplot as plt


def rows(name):
    with open(name, newline=\"\") as fh:
        return list(csv.DictReader(fh))


def num(s):
    try:
        return float(s)
    except ValueError:
        return math.nan

";

const SOLVE: &str = "\
table = rows(\"solve.csv\")
labels = [f\"{num(r['t_re']):.2f}{num(r['t_im']):+.2f}i\" for r in table]
fig, ax = plt.subplots()
ax.semilogy(range(len(table)), [num(r[\"residual_sup\"]) for r in table], \"o-\")
ax.set_xticks(range(len(table)), labels, rotation=45)
ax.set_ylabel(\"Newton residual (sup)\")
fig.tight_layout()
fig.savefig(\"solve.png\", dpi=150)
";

const VERIFY: &str = "\
table = rows(\"verify.csv\")
x = range(len(table))
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
ax[0].semilogy(x, [num(r[\"residual_sup\"]) for r in table], \"o-\", label=\"sup\")
ax[0].semilogy(x, [num(r[\"residual_l2\"]) for r in table], \"s-\", label=\"L2\")
ax[0].set_title(\"identity residual\")
ax[0].legend()
ax[1].plot(x, [num(r[\"min_c\"]) for r in table], \"o-\", label=\"min c\")
ax[1].plot(x, [num(r[\"min_eig_rho\"]) for r in table], \"s-\", label=\"min eig rho\")
ax[1].legend()
fig.tight_layout()
fig.savefig(\"verify.png\", dpi=150)
";

const SWEEP: &str = "\
table = rows(\"sweep.csv\")
fig, ax = plt.subplots()
for key in sorted({(r[\"t_re\"], r[\"t_im\"]) for r in table}):
    sel = [r for r in table if (r[\"t_re\"], r[\"t_im\"]) == key]
    ax.loglog([num(r[\"epsilon\"]) for r in sel], [max(num(r[\"min_eig_rho\"]), 1e-300) for r in sel], \"o-\",
              label=f\"t = {num(key[0]):.2f}{num(key[1]):+.2f}i\")
ax.set_xlabel(\"epsilon\")
ax.set_ylabel(\"min eig rho\")
ax.legend()
fig.tight_layout()
fig.savefig(\"sweep.png\", dpi=150)
";

const BERGMAN: &str = "\
table = rows(\"bergman.csv\")
ms = sorted({int(r[\"m\"]) for r in table})
sup = [max(num(r[\"abs_error\"]) for r in table if int(r[\"m\"]) == m) for m in ms]
fig, ax = plt.subplots()
ax.loglog(ms, sup, \"o-\", label=\"sup error\")
ax.loglog(ms, [math.log(m) / m for m in ms], \"--\", label=\"log m / m\")
ax.set_xlabel(\"m\")
ax.legend()
fig.tight_layout()
fig.savefig(\"bergman.png\", dpi=150)
";

pub(crate) fn plot_script(command: Command) -> String {
    let body = match command {
        Command::Solve => SOLVE,
        Command::Verify => VERIFY,
        Command::Sweep => SWEEP,
        Command::Bergman => BERGMAN,
    };
    format!("{HEADER}{body}")
}
