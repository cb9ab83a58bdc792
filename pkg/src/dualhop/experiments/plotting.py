"""Gnuplot script generation for written curve artifacts.

The script only names CSV files that sit next to it, so the output
directory can be moved or archived as a unit.
"""

from __future__ import annotations

from collections import OrderedDict


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_plot_script(artifacts) -> str:
    """One PNG per figure id; OP curves on a log axis, the rest linear."""
    figures: "OrderedDict[str, list]" = OrderedDict()
    for art in artifacts:
        figures.setdefault(art.figure, []).append(art)
    lines = [
        "# gnuplot script generated by dualhop; run from this directory: gnuplot plot.gp",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key outside right",
        "set grid",
        "set terminal pngcairo size 1000,650",
        "",
    ]
    for fig, arts in figures.items():
        lines.append(f"set output {_quote(fig + '.png')}")
        lines.append(f"set title {_quote(fig)}")
        lines.append(f"set xlabel {_quote(arts[0].x_label)}")
        lines.append(f"set ylabel {_quote(arts[0].y_label)}")
        if arts[0].log_y:
            lines.append("set logscale y")
            lines.append("set format y '10^{%L}'")
        else:
            lines.append("unset logscale y")
            lines.append("set format y '%g'")
        plots = []
        for art in arts:
            for s in art.series():
                cond = f'(strcol(2) eq {_quote(s)} ? $1 : NaN)'
                plots.append(f"{_quote(art.name + '.csv')} skip 1 using {cond}:3 with linespoints title {_quote(s)}")
        lines.append("plot " + ", \\\n     ".join(plots))
        lines.append("")
    lines.append("unset output")
    return "\n".join(lines) + "\n"
