"""
Report generation module.
"""

import csv
import dataclasses
import json
from pathlib import Path
from typing import Any, Dict

import jsonschema
import numpy as np
from colorama import Fore, Style, init
from tabulate import tabulate

from .errors import InvariantError
from .experiments import (
    CLTReport, DecaySeries, DefectReport, EstimateReport, HolderReport, RNReport,
    RatioReport, ResidualReport, TVReport
)

# Initialize colorama for cross-platform colored output
init(autoreset=True)

SCHEMA_PATH = Path(__file__).parent / "schemas" / "report.schema.json"

REPORT_KINDS = {
    CLTReport: "clt",
    DecaySeries: "gromov_decay",
    TVReport: "tv",
    RNReport: "rn",
    EstimateReport: "estimate",
    RatioReport: "ratio",
    ResidualReport: "residual",
    HolderReport: "holder",
    DefectReport: "defect",
}

# Row-shaped reports: (title, columns) for console and CSV output
_TABLES = {
    "tv": ("Total variation to uniform classes", ["n", "cycles", "classes", "tv_distance"]),
    "rn": ("Radon-Nikodym sup deviation", ["n", "m", "sup_deviation"]),
    "estimate": ("Drift and spread estimates", ["n", "sample_count", "L_hat", "sigma_hat"]),
    "ratio": ("Paths per closed path", ["n", "paths", "closed_paths", "ratio"]),
    "residual": ("Translation length residuals", ["n", "sample_count", "max_residual", "mean_residual"]),
    "holder": ("DF differences by common prefix", ["k", "pairs", "max_difference"]),
    "defect": ("Displacement defects", ["n", "sample_count", "max_defect", "mean_defect"]),
}


def _plain(value: Any) -> Any:
    """Convert tuples and numpy scalars into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, int):
        return f"{value:,}"
    return str(value)


class Reporter:
    """Console summaries and file export for geoclt reports."""

    def __init__(self):
        """Initialize the Reporter."""
        self._schema = None

    def kind_of(self, report: Any) -> str:
        if isinstance(report, dict):
            return report["kind"]
        try:
            return REPORT_KINDS[type(report)]
        except KeyError:
            raise InvariantError(f"no report kind for {type(report).__name__}")

    def to_document(self, report: Any) -> Dict[str, Any]:
        """
        Turn a report into a plain dict with `kind`, `config` and `warnings`.

        The raw normalized CLT sample is not embedded; it goes to CSV and the
        document keeps only its file reference.

        Args:
            report: Report dataclass, or an already plain dict with a `kind`

        Returns:
            JSON-ready dict
        """
        if isinstance(report, dict):
            document = dict(report)
        else:
            document = {}
            for f in dataclasses.fields(report):
                if f.name == "normalized_sample":
                    continue
                value = getattr(report, f.name)
                if isinstance(value, list) and value and dataclasses.is_dataclass(value[0]):
                    value = [dataclasses.asdict(item) for item in value]
                document[f.name] = value
            document["kind"] = self.kind_of(report)
        document.setdefault("config", {})
        document.setdefault("warnings", [])
        return _plain(document)

    def format_console_report(self, report: Any) -> str:
        """
        Format a report for console output.

        Args:
            report: Report dataclass or plain document

        Returns:
            Formatted string for console output
        """
        document = self.to_document(report)
        kind = document["kind"]
        lines = []

        lines.append(f"{Fore.CYAN}{'=' * 60}")
        lines.append(f"{Fore.CYAN}geoclt {kind} report")
        lines.append(f"{Fore.CYAN}{'=' * 60}")
        lines.append("")

        if kind == "clt":
            lines.append(f"{Fore.YELLOW}Summary:")
            for label, key in (("Statistic", "statistic_kind"), ("Sampler", "sampler"),
                               ("n", "n"), ("Samples", "sample_count"), ("Seed", "seed"),
                               ("Mean", "mean"), ("Variance", "variance"), ("L_hat", "L_hat"),
                               ("sigma_hat", "sigma_hat")):
                lines.append(f"  {label}: {Fore.GREEN}{_cell(document[key])}")
            lines.append(f"  KS statistic: {Fore.GREEN}{document['ks_statistic']:.6f}")
            lines.append("")
        elif kind == "gromov_decay":
            ns = [row["n"] for row in document["reports"][0]["rows"]]
            table_data = [
                [_cell(r["epsilon"])] + [_cell(row["exceed_fraction"]) for row in r["rows"]]
                for r in document["reports"]
            ]
            headers = ["epsilon"] + [f"n={n}" for n in ns]
            lines.append(f"{Fore.YELLOW}Fraction with self Gromov product > epsilon sqrt(n):")
            lines.append(tabulate(table_data, headers=headers, tablefmt="grid"))
            lines.append("")
        elif kind in _TABLES:
            title, columns = _TABLES[kind]
            lines.append(f"{Fore.YELLOW}{title}:")
            table_data = [[_cell(row[c]) for c in columns] for row in document["rows"]]
            lines.append(tabulate(table_data, headers=columns, tablefmt="grid"))
            for extra in ("L_spread", "sigma_spread", "slope", "length", "noise_floor", "growth_ratio"):
                if document.get(extra) is not None:
                    lines.append(f"  {extra}: {Fore.GREEN}{_cell(document[extra])}")
            lines.append("")
        else:
            lines.append(f"{Fore.YELLOW}Summary:")
            for key, value in sorted(document.items()):
                if key in ("kind", "config", "warnings") or isinstance(value, (dict, list)):
                    continue
                lines.append(f"  {key}: {Fore.GREEN}{_cell(value)}")
            for key, value in sorted(document.items()):
                if isinstance(value, list) and value and isinstance(value[0], dict):
                    columns = list(value[0])
                    lines.append(f"{Fore.YELLOW}{key}:")
                    table_data = [[_cell(row[c]) for c in columns] for row in value]
                    lines.append(tabulate(table_data, headers=columns, tablefmt="simple"))
            lines.append("")

        for message in document["warnings"]:
            lines.append(f"{Fore.RED}Warning: {message}{Style.RESET_ALL}")

        return "\n".join(lines)

    def export_json(self, document: Dict[str, Any], output_file: str) -> None:
        """
        Export a document to JSON format.

        Keys are sorted and nothing time dependent is written, so identical
        runs produce identical files.

        Args:
            document: Plain document from to_document
            output_file: Output file path
        """
        with open(output_file, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")

    def export_csv(self, report: Any, output_file: str) -> None:
        """
        Export report data to CSV format.

        CLT reports write their normalized sample (one value per line);
        table-shaped reports write their rows.

        Args:
            report: Report dataclass
            output_file: Output file path
        """
        kind = self.kind_of(report)
        with open(output_file, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            if kind == "clt":
                writer.writerow(["normalized"])
                for value in report.normalized_sample:
                    writer.writerow([repr(float(value))])
            elif kind == "gromov_decay":
                writer.writerow(["epsilon", "n", "sample_count", "exceed_fraction"])
                for decay in report.reports:
                    for row in decay.rows:
                        writer.writerow([decay.epsilon, row.n, row.sample_count, row.exceed_fraction])
            elif kind in _TABLES:
                columns = _TABLES[kind][1]
                writer.writerow(columns)
                for row in report.rows:
                    writer.writerow([getattr(row, c) for c in columns])
            else:
                raise InvariantError(f"no CSV layout for {kind} reports")

    def validate(self, document: Dict[str, Any]) -> None:
        """
        Check a document against the shipped report schema.

        Raises:
            InvariantError: if the document does not validate
        """
        if self._schema is None:
            with open(SCHEMA_PATH, encoding="utf-8") as f:
                self._schema = json.load(f)
        try:
            jsonschema.validate(document, self._schema)
        except jsonschema.ValidationError as e:
            location = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise InvariantError(f"report does not match its schema at {location}: {e.message}")
