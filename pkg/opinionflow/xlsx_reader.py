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

from .common import ParseError, issue, xlsx_rows


def _node_id(value):
    if isinstance(value, bool):
        raise ValueError(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(value)
        return int(value)
    return int(str(value).strip())


def _is_header(row):
    return all(isinstance(v, str) and not _is_number(v) for v in row)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def xlsx_reader(edge_file, edge_file_name, edge_file_type):
    """
    Yield (u, v) node pairs from the first two columns of the active
    worksheet. A first row of text cells is taken as a header.
    """
    for index, (row_num, row) in enumerate(xlsx_rows(edge_file)):
        if index == 0 and _is_header(row):
            continue
        try:
            u, v = _node_id(row[0]), _node_id(row[1])
        except (ValueError, IndexError):
            issue(
                "{}: row {} does not hold two node ids.".format(edge_file_name, row_num),
                "error",
                ParseError,
                line=row_num,
            )
        yield u, v
