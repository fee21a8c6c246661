# -*- coding: utf-8 -*-
"""
Result files of a run: the structured JSON report, plot-ready CSV tables and
the HDF5 dump of control coefficients.
"""

import csv
import datetime
import json
import logging
import os

import h5py
import numpy as np

logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
SWEEP_NAME = "sweep.csv"
WKB_NAME = "wkb.csv"
COEFFS_NAME = "control_coeffs.h5"

SWEEP_HEADER = ("T", "sigma_min", "residual")


def _plain(value):
    """json default hook for numpy scalars and arrays."""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError("{0!r} is not JSON serializable".format(value))


def write_report(directory, command, document, config=None):
    """
        Description
        -----------
            Writes report.json into directory. The resolved configuration is
            embedded under "config"; "created" is the only field that changes
            between reruns of the same configuration.
        Output
        ------
            :return: path of the written file
    """
    body = {"command": command, "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "result": document}
    if config is not None:
        body["config"] = config.to_dict()
    filename = os.path.join(directory, REPORT_NAME)
    with open(filename, "w") as f:
        json.dump(body, f, indent=2, sort_keys=True, default=_plain)
        f.write("\n")
    logger.info("report written to %s", filename)
    return filename


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(filename, header, rows):
    """CSV with a header line; numbers in shortest round-trip form with a decimal point."""
    with open(filename, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row {0!r} does not match header {1}".format(row, header))
            writer.writerow([_cell(v) for v in row])
    logger.info("%d rows written to %s", len(rows), filename)
    return filename


def read_table(filename):
    with open(filename, "r", newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        rows = [tuple(float(v) for v in row) for row in reader]
    return header, rows


def save_control_coeffs(filename, plan, attrs=None):
    """
        Description
        -----------
            HDF5 dump of a control plan: group "control" holding theta with
            dimensions (basis, mode, channel), each attached to a scale, and
            the basis description as attributes.
        Input
        -----
            :param plan: hum.ControlPlan
            :param attrs: extra scalar attributes (T, N, ...)
    """
    theta = np.asarray(plan.theta)
    with h5py.File(filename, "w") as HD5file:
        group = HD5file.create_group("control")

        group["basis"] = np.arange(theta.shape[0])
        group["mode"] = np.arange(-plan.Nc, plan.Nc + 1)
        group["channel"] = np.arange(theta.shape[2])
        group["theta"] = theta

        for axis, name in enumerate(("basis", "mode", "channel")):
            group[name].make_scale(name)
            group["theta"].dims[axis].label = name
            group["theta"].dims[axis].attach_scale(group[name])

        for key, value in plan.basis.describe().items():
            group.attrs["basis_" + key] = value
        group.attrs["N_c"] = plan.Nc
        group.attrs["l2_norm"] = plan.l2_norm()
        for key, value in (attrs or {}).items():
            group.attrs[key] = value
    logger.info("control coefficients %s written to %s", theta.shape, filename)
    return filename


def load_control_coeffs(filename):
    """(theta, attributes) of a dump written by save_control_coeffs."""
    with h5py.File(filename, "r") as HD5file:
        group = HD5file["control"]
        theta = group["theta"][()]
        attrs = {}
        for key, value in group.attrs.items():
            attrs[key] = value.item() if isinstance(value, np.generic) else value
    return theta, attrs
