"""Tokenizer for policy source"""

import re
from dataclasses import dataclass
from typing import List

from src.utils.errors import PolicySyntaxError

IDENT = 'IDENT'
INT = 'INT'
STRING = 'STRING'
OP = 'OP'
EOF = 'EOF'

_TOKEN_RE = re.compile(r'''
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>!=|<=|>=|[{}()\[\],=<>+\-*])
''', re.VERBOSE)

_ESCAPES = {'"': '"', '\\': '\\', 'n': '\n', 't': '\t'}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int

    def __str__(self):
        return 'end of input' if self.kind == EOF else repr(self.value)


def _unescape(body: str, line: int, column: int) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == '\\':
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise PolicySyntaxError(f"unknown escape '\\{nxt}'", line, column + i + 1)
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return ''.join(out)


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        column = pos - line_start + 1
        if match is None:
            raise PolicySyntaxError(f"unexpected character {source[pos]!r}", line, column)
        kind = match.lastgroup
        text = match.group()
        if kind == 'newline':
            line += 1
            line_start = match.end()
        elif kind == 'int':
            tokens.append(Token(INT, text, line, column))
        elif kind == 'ident':
            tokens.append(Token(IDENT, text, line, column))
        elif kind == 'string':
            tokens.append(Token(STRING, _unescape(text[1:-1], line, column), line, column))
        elif kind == 'op':
            tokens.append(Token(OP, text, line, column))
        pos = match.end()
    tokens.append(Token(EOF, '', line, pos - line_start + 1))
    return tokens


def escape_text(value: str) -> str:
    """Quote a text value so the tokenizer reads it back unchanged"""
    escaped = value.replace('\\', '\\\\').replace('"', '\\"').replace('\n', '\\n').replace('\t', '\\t')
    return f'"{escaped}"'
