"""
Standalone gnuplot scripts for the CSV files of a run.

Scripts reference the CSVs by path relative to the run directory, so
`cd <run dir> && gnuplot trajectories.gp` renders them. Plotting is optional;
nothing in the package reads these files back.
"""

from __future__ import annotations

from collections.abc import Mapping

from src.domain.interfaces import IScriptRenderer

_PREAMBLE = """\
set datafile separator ","
set key autotitle columnhead
set grid
"""


def _overlay(files: Mapping[str, str], column: int) -> str:
    return ", \\\n     ".join(
        f"'{path}' using 1:{column} with lines title '{label}'" for label, path in files.items()
    )


class GnuplotScriptRenderer(IScriptRenderer):

    def __init__(self, terminal: str = "pngcairo size 1200,900") -> None:
        self._terminal = terminal

    def _header(self, output: str) -> str:
        return f"{_PREAMBLE}set terminal {self._terminal}\nset output '{output}'\n"

    def trajectories(self, csv_files: Mapping[str, str], n: int) -> str:
        """q1, p1 and s against t, one curve per scheme (columns t,q1..qn,p1..pn,s,...)."""
        panels = [("q_1", 2), ("p_1", n + 2), ("s", 2 * n + 2)]
        body = "".join(
            f"set ylabel '{name}'\nplot {_overlay(csv_files, column)}\n" for name, column in panels
        )
        return (
            self._header("trajectories.png")
            + "set multiplot layout 3,1 title 'Sample trajectories'\nset xlabel 't'\n"
            + body
            + "unset multiplot\n"
        )

    def diagnostics(self, residual_files: Mapping[str, str], lambda_files: Mapping[str, str]) -> str:
        """Pullback residual (log scale) and conformal factor against its references."""
        residual_plot = ", \\\n     ".join(
            f"'{path}' using 2:3 with linespoints title '{label}'" for label, path in residual_files.items()
        )
        lambda_plot = ", \\\n     ".join(
            f"'{path}' using 2:3 with lines title '{label} lambda', "
            f"'{path}' using 2:4 with lines dashtype 2 title '{label} reference'"
            for label, path in lambda_files.items()
        )
        return (
            self._header("diagnostics.png")
            + "set multiplot layout 2,1\nset xlabel 't'\n"
            + "set logscale y\nset ylabel 'pullback residual'\n"
            + f"plot {residual_plot}\n"
            + "unset logscale y\nset ylabel 'conformal factor'\n"
            + f"plot {lambda_plot}\n"
            + "unset multiplot\n"
        )

    def convergence(self, csv_file: str) -> str:
        return (
            self._header("convergence.png")
            + "set logscale xy\nset xlabel 'h'\nset ylabel 'strong error'\n"
            + f"plot '{csv_file}' using 1:2 with linespoints title 'strong error'\n"
        )
