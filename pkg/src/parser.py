"""Parser and canonical printer for the BUGS model dialect.

The dialect follows JAGS tokens: ``~`` for stochastic and ``<-`` (or ``=``)
for deterministic declarations, ``for (i in a:b) { ... }`` loops,
``if (cond) { ... } else { ... }`` blocks and ``#`` line comments.

Operator precedence, loosest first::

    ||   &&   == != < <= > >=   + -   * /   unary - !   ^

``^`` binds tighter than unary minus and is right associative, so ``-x^2``
is ``-(x^2)`` and ``2^-1`` is ``2^(-1)``.
"""

import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .errors import ParseError

STOCHASTIC = "stochastic"
DETERMINISTIC = "deterministic"

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Range:
    start: "Expression"
    end: "Expression"


@dataclass(frozen=True)
class Variable:
    """A variable reference; ``indices`` is empty for an unindexed name."""

    name: str
    indices: Tuple[Union["Expression", Range], ...] = ()


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: "Expression"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    function: str
    args: Tuple["Expression", ...]


Expression = Union[Number, Variable, UnaryOp, BinaryOp, Call]


@dataclass(frozen=True)
class Argument:
    name: Optional[str]
    value: Expression


@dataclass(frozen=True)
class DistributionCall:
    name: str
    args: Tuple[Argument, ...]

    @property
    def named(self) -> bool:
        return any(arg.name is not None for arg in self.args)


@dataclass(frozen=True)
class Declaration:
    target: Variable
    kind: str
    rhs: Union[DistributionCall, Expression]
    line: int = field(default=0, compare=False)

    @property
    def stochastic(self) -> bool:
        return self.kind == STOCHASTIC


@dataclass(frozen=True)
class ForLoop:
    var: str
    start: Expression
    end: Expression
    body: Tuple["Statement", ...]


@dataclass(frozen=True)
class IfElse:
    condition: Expression
    then_body: Tuple["Statement", ...]
    else_body: Tuple["Statement", ...] = ()


Statement = Union[Declaration, ForLoop, IfElse]


@dataclass(frozen=True)
class ModelAST:
    declarations: Tuple[Statement, ...]


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<space>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z][A-Za-z0-9_.]*)
  | (?P<op><-|<=|>=|==|!=|&&|\|\||[~=<>!+\-*/^(){}\[\],:;])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"for", "in", "if", "else"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    newline_before: bool = False


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    offset = 0
    line = 1
    line_start = 0
    newline_before = False
    while offset < len(text):
        match = _TOKEN_RE.match(text, offset)
        column = offset - line_start + 1
        if not match:
            raise ParseError("Unexpected character", line, column, text[offset])
        kind = match.lastgroup
        chunk = match.group()
        if kind in ("space", "comment"):
            newlines = chunk.count("\n")
            if newlines:
                newline_before = True
                line += newlines
                line_start = offset + chunk.rindex("\n") + 1
        else:
            if kind == "name" and chunk in _KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, chunk, line, column, newline_before))
            newline_before = False
        offset = match.end()
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
# ---------------------------------------------------------------------------

_COMPARISONS = {"==", "!=", "<", "<=", ">", ">="}
_UNSUPPORTED_SUFFIXES = {"T", "I"}


class _Parser:
    def __init__(self, text: str):
        self._tokens = tokenize(text)
        self._pos = 0
        # Parenthesis depth; a newline only ends an expression at depth 0.
        self._depth = 0

    # -- token helpers -----------------------------------------------------

    def _peek(self, ahead: int = 0) -> Optional[Token]:
        index = self._pos + ahead
        return self._tokens[index] if index < len(self._tokens) else None

    def _at(self, text: str, ahead: int = 0) -> bool:
        token = self._peek(ahead)
        return token is not None and token.kind in ("op", "keyword") and token.text == text

    def _next(self) -> Token:
        token = self._peek()
        if token is None:
            raise ParseError("Unexpected end of input")
        self._pos += 1
        return token

    def _expect(self, text: str) -> Token:
        token = self._peek()
        if token is None:
            raise ParseError(f"Expected '{text}'")
        if token.text != text or token.kind not in ("op", "keyword"):
            raise ParseError(f"Expected '{text}'", token.line, token.column, token.text)
        self._pos += 1
        return token

    def _expect_name(self) -> Token:
        token = self._peek()
        if token is None:
            raise ParseError("Expected a name")
        if token.kind != "name":
            raise ParseError("Expected a name", token.line, token.column, token.text)
        self._pos += 1
        return token

    def _error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self._peek()
        if token is None:
            return ParseError(message)
        return ParseError(message, token.line, token.column, token.text)

    def _continues_expression(self) -> bool:
        token = self._peek()
        return token is not None and not (token.newline_before and self._depth == 0)

    # -- statements ----------------------------------------------------------

    def parse_program(self) -> ModelAST:
        first = self._peek()
        if first is not None and first.kind == "name" and first.text == "model" and self._at("{", 1):
            self._next()
            body = self._block()
            if self._peek() is not None:
                raise self._error("Unexpected input after the model block")
            return ModelAST(body)
        statements = []
        while self._peek() is not None:
            if self._at("}"):
                raise self._error("Unmatched '}'")
            statements.append(self._statement())
        return ModelAST(tuple(statements))

    def _statement(self) -> Statement:
        token = self._peek()
        if token is None:
            raise ParseError("Expected a statement at end of input")
        if token.kind == "keyword" and token.text == "for":
            statement = self._for_loop()
        elif token.kind == "keyword" and token.text == "if":
            statement = self._if_else()
        else:
            statement = self._declaration()
        while self._at(";"):
            self._next()
        return statement

    def _block(self) -> Tuple[Statement, ...]:
        if not self._at("{"):
            return (self._statement(),)
        self._expect("{")
        statements = []
        while not self._at("}"):
            if self._peek() is None:
                raise ParseError("Missing '}' at end of block")
            statements.append(self._statement())
        self._expect("}")
        return tuple(statements)

    def _for_loop(self) -> ForLoop:
        self._expect("for")
        self._expect("(")
        self._depth += 1
        var = self._expect_name().text
        self._expect("in")
        start = self._expression()
        self._expect(":")
        end = self._expression()
        self._depth -= 1
        self._expect(")")
        return ForLoop(var, start, end, self._block())

    def _if_else(self) -> IfElse:
        self._expect("if")
        self._expect("(")
        self._depth += 1
        condition = self._expression()
        self._depth -= 1
        self._expect(")")
        then_body = self._block()
        else_body: Tuple[Statement, ...] = ()
        if self._at("else"):
            self._next()
            else_body = self._block()
        return IfElse(condition, then_body, else_body)

    def _declaration(self) -> Declaration:
        start = self._peek()
        name = self._expect_name()
        target = Variable(name.text, self._index_list(name.text) if self._at("[") else ())
        if self._at("~"):
            self._next()
            rhs = self._distribution_call()
            return Declaration(target, STOCHASTIC, rhs, start.line)
        if self._at("<-") or self._at("="):
            self._next()
            return Declaration(target, DETERMINISTIC, self._expression(), start.line)
        raise self._error("Expected '~' or '<-' after declaration target")

    def _distribution_call(self) -> DistributionCall:
        name = self._peek()
        if name is None or name.kind != "name" or not self._at("(", 1):
            raise self._error("Expected a distribution call after '~'")
        self._next()
        self._expect("(")
        self._depth += 1
        args: List[Argument] = []
        seen = set()
        if not self._at(")"):
            while True:
                token = self._peek()
                if token is not None and token.kind == "name" and self._at("=", 1):
                    self._pos += 2
                    if token.text in seen:
                        raise ParseError(
                            f"Duplicate named argument '{token.text}'",
                            token.line,
                            token.column,
                            token.text,
                        )
                    seen.add(token.text)
                    args.append(Argument(token.text, self._expression()))
                else:
                    args.append(Argument(None, self._expression()))
                if not self._at(","):
                    break
                self._next()
        self._depth -= 1
        self._expect(")")
        suffix = self._peek()
        if (
            suffix is not None
            and suffix.kind == "name"
            and suffix.text in _UNSUPPORTED_SUFFIXES
            and self._at("(", 1)
        ):
            raise self._error(
                f"Truncation/censoring syntax '{suffix.text}(,)' is unsupported", suffix
            )
        return DistributionCall(name.text, tuple(args))

    def _index_list(self, name: str) -> Tuple[Union[Expression, Range], ...]:
        self._expect("[")
        self._depth += 1
        items: List[Union[Expression, Range]] = []
        while True:
            if self._at(",") or self._at("]"):
                raise self._error(f"Malformed index expression for '{name}': empty index")
            start_token = self._peek()
            start = self._expression()
            _check_index(start, name, start_token)
            if self._at(":"):
                self._next()
                end_token = self._peek()
                end = self._expression()
                _check_index(end, name, end_token)
                items.append(Range(start, end))
            else:
                items.append(start)
            if not self._at(","):
                break
            self._next()
        self._depth -= 1
        self._expect("]")
        return tuple(items)

    # -- expressions -------------------------------------------------------

    def _expression(self) -> Expression:
        return self._or()

    def _or(self) -> Expression:
        left = self._and()
        while self._continues_expression() and self._at("||"):
            self._next()
            left = BinaryOp("||", left, self._and())
        return left

    def _and(self) -> Expression:
        left = self._comparison()
        while self._continues_expression() and self._at("&&"):
            self._next()
            left = BinaryOp("&&", left, self._comparison())
        return left

    def _comparison(self) -> Expression:
        left = self._additive()
        token = self._peek()
        if self._continues_expression() and token.kind == "op" and token.text in _COMPARISONS:
            self._next()
            left = BinaryOp(token.text, left, self._additive())
            after = self._peek()
            if after is not None and after.kind == "op" and after.text in _COMPARISONS:
                raise self._error("Comparison operators cannot be chained", after)
        return left

    def _additive(self) -> Expression:
        left = self._multiplicative()
        while self._continues_expression() and (self._at("+") or self._at("-")):
            op = self._next().text
            left = BinaryOp(op, left, self._multiplicative())
        return left

    def _multiplicative(self) -> Expression:
        left = self._unary()
        while self._continues_expression() and (self._at("*") or self._at("/")):
            op = self._next().text
            left = BinaryOp(op, left, self._unary())
        return left

    def _unary(self) -> Expression:
        if self._at("-") or self._at("!"):
            op = self._next().text
            return UnaryOp(op, self._unary())
        if self._at("+"):
            self._next()
            return self._unary()
        return self._power()

    def _power(self) -> Expression:
        base = self._primary()
        if self._continues_expression() and self._at("^"):
            self._next()
            return BinaryOp("^", base, self._unary())
        return base

    def _primary(self) -> Expression:
        token = self._peek()
        if token is None:
            raise ParseError("Unexpected end of input in expression")
        if token.kind == "number":
            self._next()
            return Number(float(token.text))
        if token.kind == "name":
            self._next()
            if self._at("("):
                return Call(token.text, self._call_args())
            if self._at("["):
                return Variable(token.text, self._index_list(token.text))
            return Variable(token.text)
        if self._at("("):
            self._next()
            self._depth += 1
            inner = self._expression()
            self._depth -= 1
            self._expect(")")
            return inner
        raise self._error("Unexpected token in expression")

    def _call_args(self) -> Tuple[Expression, ...]:
        self._expect("(")
        self._depth += 1
        args: List[Expression] = []
        if not self._at(")"):
            args.append(self._expression())
            while self._at(","):
                self._next()
                args.append(self._expression())
        self._depth -= 1
        self._expect(")")
        return tuple(args)


def _check_index(expr: Expression, name: str, token: Optional[Token]) -> None:
    """Index expressions may only combine names, integer literals and arithmetic."""

    def fail(reason: str) -> ParseError:
        if token is None:
            return ParseError(f"Malformed index expression for '{name}': {reason}")
        return ParseError(
            f"Malformed index expression for '{name}': {reason}",
            token.line,
            token.column,
            token.text,
        )

    if isinstance(expr, Number):
        if not float(expr.value).is_integer():
            raise fail(f"non-integer literal {expr.value}")
    elif isinstance(expr, Variable):
        for item in expr.indices:
            parts = (item.start, item.end) if isinstance(item, Range) else (item,)
            for part in parts:
                _check_index(part, name, token)
    elif isinstance(expr, UnaryOp):
        _check_index(expr.operand, name, token)
    elif isinstance(expr, BinaryOp):
        if expr.op not in ("+", "-", "*", "/"):
            raise fail(f"operator '{expr.op}' not allowed")
        _check_index(expr.left, name, token)
        _check_index(expr.right, name, token)
    else:
        raise fail("function calls are not allowed")


def parse_model(text: str) -> ModelAST:
    """Parse model source text into a ModelAST, keeping declaration order."""
    if not text or not text.strip():
        raise ParseError("Model text is empty")
    ast = _Parser(text).parse_program()
    if not ast.declarations:
        raise ParseError("Model has no declarations")
    return ast


def parse_expression(text: str) -> Expression:
    parser = _Parser(text)
    expr = parser._expression()
    leftover = parser._peek()
    if leftover is not None:
        raise ParseError("Unexpected trailing input", leftover.line, leftover.column, leftover.text)
    return expr


def parse_node_name(text: str) -> Variable:
    """Parse a node-name string such as ``theta[1:3]`` or ``y[2, 3]``."""
    expr = parse_expression(text)
    if not isinstance(expr, Variable):
        raise ParseError(f"'{text}' is not a node name")
    return expr


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------

_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
    "^": 7,
}
_UNARY_PRECEDENCE = 6
_ATOM_PRECEDENCE = 8


def _precedence(expr) -> int:
    if isinstance(expr, BinaryOp):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, UnaryOp):
        return _UNARY_PRECEDENCE
    return _ATOM_PRECEDENCE


def format_number(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def deparse_expression(expr, leaf=None) -> str:
    """Print an expression with minimal parentheses.

    ``leaf`` may render node types the parser does not produce (used for
    resolved graph expressions); it returns None for everything else.
    """
    if leaf is not None:
        rendered = leaf(expr)
        if rendered is not None:
            return rendered
    if isinstance(expr, Number):
        return format_number(expr.value)
    if isinstance(expr, Range):
        return f"{deparse_expression(expr.start, leaf)}:{deparse_expression(expr.end, leaf)}"
    if isinstance(expr, Variable):
        if not expr.indices:
            return expr.name
        return f"{expr.name}[{', '.join(deparse_expression(i, leaf) for i in expr.indices)}]"
    if isinstance(expr, Call):
        return f"{expr.function}({', '.join(deparse_expression(a, leaf) for a in expr.args)})"
    if isinstance(expr, UnaryOp):
        inner = deparse_expression(expr.operand, leaf)
        if _precedence(expr.operand) < _UNARY_PRECEDENCE:
            inner = f"({inner})"
        return f"{expr.op}{inner}"
    if isinstance(expr, BinaryOp):
        own = _PRECEDENCE[expr.op]
        left = deparse_expression(expr.left, leaf)
        right = deparse_expression(expr.right, leaf)
        if expr.op == "^":
            if _precedence(expr.left) <= own:
                left = f"({left})"
            if _precedence(expr.right) < _UNARY_PRECEDENCE:
                right = f"({right})"
            return f"{left}^{right}"
        left_limit = own if own == 3 else own - 1
        if _precedence(expr.left) <= left_limit:
            left = f"({left})"
        if _precedence(expr.right) <= own:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"Cannot deparse {expr!r}")


def _deparse_argument(arg: Argument) -> str:
    value = deparse_expression(arg.value)
    return f"{arg.name} = {value}" if arg.name else value


def _deparse_statements(statements, indent: int, lines: List[str]) -> None:
    pad = "  " * indent
    for statement in statements:
        if isinstance(statement, Declaration):
            target = deparse_expression(statement.target)
            if statement.stochastic:
                args = ", ".join(_deparse_argument(a) for a in statement.rhs.args)
                lines.append(f"{pad}{target} ~ {statement.rhs.name}({args})")
            else:
                lines.append(f"{pad}{target} <- {deparse_expression(statement.rhs)}")
        elif isinstance(statement, ForLoop):
            lines.append(
                f"{pad}for ({statement.var} in {deparse_expression(statement.start)}:"
                f"{deparse_expression(statement.end)}) {{"
            )
            _deparse_statements(statement.body, indent + 1, lines)
            lines.append(f"{pad}}}")
        elif isinstance(statement, IfElse):
            lines.append(f"{pad}if ({deparse_expression(statement.condition)}) {{")
            _deparse_statements(statement.then_body, indent + 1, lines)
            if statement.else_body:
                lines.append(f"{pad}}} else {{")
                _deparse_statements(statement.else_body, indent + 1, lines)
            lines.append(f"{pad}}}")


def deparse_model(ast: ModelAST) -> str:
    """Print ``ast`` as canonical model text; parsing it back gives an equal AST."""
    lines: List[str] = []
    _deparse_statements(ast.declarations, 0, lines)
    return "\n".join(lines)
