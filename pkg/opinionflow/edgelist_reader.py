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

from pyparsing import *

from .common import ParseError, issue


def _edge_grammar():
    """One edge per line: two node ids separated by blanks or a comma."""
    node = Word(nums).setParseAction(lambda t: int(t[0]))
    edge = node("u") + Optional(Suppress(",")) + node("v")
    line = Optional(edge) + StringEnd()
    line.ignore(pythonStyleComment)
    return line


def edgelist_reader(edge_file, edge_file_name, edge_file_type):
    """
    Yield (u, v) node pairs from a text edge list. Blank lines and anything
    after a '#' are skipped. A malformed line raises ParseError carrying its
    1-based line number.
    """
    grammar = _edge_grammar()
    for line_num, text in enumerate(edge_file, start=1):
        try:
            fields = grammar.parseString(text.strip())
        except ParseException as e:
            issue(
                "{}:{}: bad edge '{}' ({}).".format(edge_file_name, line_num, text.strip(), e.msg),
                "error",
                ParseError,
                line=line_num,
            )
        if len(fields) == 2:
            yield fields["u"], fields["v"]
