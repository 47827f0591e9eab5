# MIT license
#
# Copyright (C) 2024-2025 by the opinionflow developers.
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN
# THE SOFTWARE.

"""
Error reporting, logging and file helpers shared by the whole package.
"""

import csv
import io
import json
import logging
import os
import os.path
import tempfile

import numpy as np
import openpyxl

logger = logging.getLogger("opinionflow")


class OpinionFlowError(Exception):
    """Base class of every error raised by opinionflow."""


class GraphError(OpinionFlowError):
    pass


class ShapeError(OpinionFlowError):
    pass


class StochasticityError(OpinionFlowError):
    pass


class CertificationError(OpinionFlowError):
    pass


class DivergenceError(OpinionFlowError):
    """The diffusion state blew up. ``step`` is the offending step (or epoch)."""

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class ConfigError(OpinionFlowError):
    """A configuration field violates its invariant. ``field`` names it."""

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field


class ParseError(OpinionFlowError):
    """An input file could not be parsed. ``line`` is 1-based when known."""

    def __init__(self, msg, line=None):
        super().__init__(msg)
        self.line = line


def issue(msg, level="warning", exc=OpinionFlowError, **exc_kwargs):
    """Report a problem. Errors are logged and then raised as ``exc``."""
    if level == "warning":
        logger.warning(msg)
    elif level == "error":
        logger.error(msg)
        raise exc(msg, **exc_kwargs)
    else:
        logger.info(msg)


_KIND_NAMES = {int: "an integer", float: "a number", str: "a string", bool: "true or false",
               tuple: "a list", list: "a list", dict: "an object"}


def config_value(value, kind, field_name):
    """
    Check one JSON config value against the type of the field it sets and
    return it converted (ints may arrive as integral floats and vice versa).
    None passes through for optional fields.
    """
    if value is None:
        return None
    ok = False
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind in (int, float):
        ok = isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool)
        if ok and kind is int:
            ok = float(value).is_integer()
            value = int(value) if ok else value
        elif ok:
            value = float(value)
    elif kind in (tuple, list):
        ok = isinstance(value, (list, tuple, range, np.ndarray))
    elif kind is dict:
        ok = isinstance(value, dict)
    elif kind is str:
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        issue(
            "{}: expected {}, got {!r}".format(field_name, _KIND_NAMES.get(kind, kind.__name__), value),
            "error",
            ConfigError,
            field=field_name,
        )
    return value


def config_items(values, kind, field_name):
    """Check every element of a list setting; see config_value."""
    values = config_value(values, list, field_name)
    return [config_value(v, kind, field_name) for v in values]


def typed_fields(cls, d, what):
    """
    Keyword arguments for dataclass ``cls`` from the config dict ``d``:
    unknown keys and values of the wrong type raise ConfigError naming the key.
    """
    if not isinstance(d, dict):
        issue("The {} settings must be an object, not {!r}.".format(what, d), "error", ConfigError, field=what)
    fields = cls.__dataclass_fields__
    kwargs = {}
    for key, value in d.items():
        if key not in fields:
            issue("Unknown {} setting '{}'.".format(what, key), "error", ConfigError, field=key)
        kwargs[key] = config_value(value, fields[key].type, key)
    return kwargs


def set_debug_level(debug_level):
    """Map the CLI's --debug LEVEL onto the package logger."""
    if debug_level is None or debug_level <= 0:
        level = logging.WARNING
    elif debug_level == 1:
        level = logging.INFO
    else:
        level = logging.DEBUG
    logging.basicConfig(format="%(levelname)s: %(name)s: %(message)s")
    logger.setLevel(level)


def is_xlsx(filename):
    return os.path.splitext(filename)[1].lower() == ".xlsx"


def _trimmed(cells):
    values = [None if v is None or str(v).strip() == "" else v for v in cells]
    while values and values[-1] is None:
        values.pop()
    return values


def xlsx_rows(xlsx_file, sheetname=None):
    """
    Return (row number, cell values) for every non-blank row of a workbook
    sheet. Blank cells stay in place as None so columns don't shift; row
    numbers are the sheet's own.
    """
    wb = openpyxl.load_workbook(xlsx_file, read_only=True, data_only=True)
    sh = wb[sheetname] if sheetname else wb.active
    rows = []
    for row_num, row in enumerate(sh.iter_rows(values_only=True), start=1):
        values = _trimmed(row)
        if values:
            rows.append((row_num, values))
    wb.close()
    return rows


def _text_rows(filename):
    with open(filename, "r", newline="") as f:
        rows = enumerate(csv.reader(f, skipinitialspace=True), start=1)
        return [(row_num, values) for row_num, values in ((n, _trimmed(r)) for n, r in rows) if values]


def _numbers(row, row_num, filename):
    try:
        return [float(v) for v in row]
    except (TypeError, ValueError):
        issue(
            "Row {} of {} has a blank or non-numeric entry.".format(row_num, filename),
            "error",
            ParseError,
            line=row_num,
        )


def read_feature_matrix(filename):
    """
    Read a node feature matrix: one row per node, no header.
    CSV or .xlsx files are accepted.
    """
    rows = xlsx_rows(filename) if is_xlsx(filename) else _text_rows(filename)
    if not rows:
        issue("Feature file {} is empty.".format(filename), "error", ParseError)
    width = len(rows[0][1])
    for row_num, row in rows:
        if len(row) != width:
            issue(
                "Row {} of {} has {} values, expected {}.".format(row_num, filename, len(row), width),
                "error",
                ParseError,
                line=row_num,
            )
    x = np.array([_numbers(row, row_num, filename) for row_num, row in rows], dtype=np.float64)
    if not np.all(np.isfinite(x)):
        issue("Feature file {} has non-finite entries.".format(filename), "error", ParseError)
    return x


def read_labels(filename, integer=True):
    """Read one label per line (integer class ids or real regression targets)."""
    rows = xlsx_rows(filename) if is_xlsx(filename) else _text_rows(filename)
    labels = []
    for row_num, row in rows:
        try:
            value = float(row[0])
        except (TypeError, ValueError):
            issue(
                "Bad label on line {} of {}.".format(row_num, filename),
                "error",
                ParseError,
                line=row_num,
            )
        if integer and value != int(value):
            issue(
                "Label on line {} of {} is not an integer class.".format(row_num, filename),
                "error",
                ParseError,
                line=row_num,
            )
        labels.append(value)
    return np.array(labels, dtype=np.int64 if integer else np.float64)


def write_atomic(path, text):
    """Write a text file by writing a temp file next to it and renaming it."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_atomic_bytes(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def csv_text(header, rows):
    """Render rows as CSV text. Floats use repr() so reruns are byte-identical."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    write_atomic(path, csv_text(header, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    write_atomic(path, json_text(obj))
