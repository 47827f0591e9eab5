import io

import numpy as np
import pytest
from openpyxl import Workbook

from opinionflow.common import ParseError, read_feature_matrix, read_labels
from opinionflow.edgelist_reader import edgelist_reader
from opinionflow.opinionflow import read_graph
from opinionflow.xlsx_reader import xlsx_reader


def test_edgelist_reader():
    text = io.StringIO("# comment\n0 1\n\n1, 2   # trailing\n 3\t0\n")
    assert list(edgelist_reader(text, "g.txt", ".txt")) == [(0, 1), (1, 2), (3, 0)]


def test_edgelist_reader_reports_line():
    text = io.StringIO("0 1\n1 2\n2 x\n")
    with pytest.raises(ParseError) as e:
        list(edgelist_reader(text, "g.txt", ".txt"))
    assert e.value.line == 3
    assert "g.txt:3" in str(e.value)


def write_xlsx(path, rows):
    wb = Workbook()
    ws = wb.active
    for row in rows:
        ws.append(row)
    wb.save(str(path))
    return str(path)


def test_xlsx_reader(tmp_path):
    path = write_xlsx(tmp_path / "g.xlsx", [["src", "dst"], [0, 1], [1.0, 2], ["2", 3]])
    with open(path, "rb") as f:
        assert list(xlsx_reader(f, path, ".xlsx")) == [(0, 1), (1, 2), (2, 3)]


def test_xlsx_reader_bad_row(tmp_path):
    path = write_xlsx(tmp_path / "g.xlsx", [[0, 1], [1, 2.5]])
    with open(path, "rb") as f:
        with pytest.raises(ParseError) as e:
            list(xlsx_reader(f, path, ".xlsx"))
    assert e.value.line == 2


def test_read_graph_picks_reader_by_extension(tmp_path):
    path = write_xlsx(tmp_path / "g.xlsx", [[0, 1], [1, 2]])
    g = read_graph(path)
    assert g.n == 3 and g.m == 2
    text_path = tmp_path / "g.txt"
    text_path.write_text("0 1\n")
    g = read_graph(str(text_path), nodes=4)
    assert g.n == 4 and g.m == 1


def test_feature_and_label_files(tmp_path):
    features = tmp_path / "x.csv"
    features.write_text("0.5,1.0\n-2,3e-1\n")
    assert np.array_equal(read_feature_matrix(str(features)), [[0.5, 1.0], [-2.0, 0.3]])
    labels = tmp_path / "y.csv"
    labels.write_text("1\n0\n2\n")
    assert read_labels(str(labels)).tolist() == [1, 0, 2]


def test_xlsx_blank_cell_keeps_columns(tmp_path):
    path = write_xlsx(tmp_path / "g.xlsx", [[0, 1], [None, 3, 4], [1, 2]])
    with open(path, "rb") as f:
        with pytest.raises(ParseError) as e:
            list(xlsx_reader(f, path, ".xlsx"))
    assert e.value.line == 2


def test_xlsx_blank_rows_keep_row_numbers(tmp_path):
    path = write_xlsx(tmp_path / "g.xlsx", [["src", "dst"], [0, 1], [None, None], [1, "x"]])
    with open(path, "rb") as f:
        with pytest.raises(ParseError) as e:
            list(xlsx_reader(f, path, ".xlsx"))
    assert e.value.line == 4


def test_numeric_first_row_is_not_a_header(tmp_path):
    path = write_xlsx(tmp_path / "g.xlsx", [["0", 1], [1, 2]])
    with open(path, "rb") as f:
        assert list(xlsx_reader(f, path, ".xlsx")) == [(0, 1), (1, 2)]


def test_feature_file_errors_name_the_row(tmp_path):
    features = tmp_path / "x.csv"
    features.write_text("1,2\n\n3,x\n")
    with pytest.raises(ParseError) as e:
        read_feature_matrix(str(features))
    assert e.value.line == 3

    path = write_xlsx(tmp_path / "x.xlsx", [[1.0, 2.0], [None, 4.0]])
    with pytest.raises(ParseError) as e:
        read_feature_matrix(path)
    assert e.value.line == 2
