"""Tests for the model-language parser and canonical printer."""

import numpy as np
import pytest

from src.errors import ParseError
from src.parser import (
    Argument,
    BinaryOp,
    Call,
    Declaration,
    DistributionCall,
    ForLoop,
    IfElse,
    ModelAST,
    Number,
    Range,
    UnaryOp,
    Variable,
    DETERMINISTIC,
    STOCHASTIC,
    deparse_model,
    parse_expression,
    parse_model,
    parse_node_name,
)

NAMES = ("a", "b", "mu", "theta", "y.obs", "w_1", "tau")
FUNCTIONS = ("exp", "log", "sqrt", "pow", "max", "ilogit")
DISTRIBUTIONS = ("dnorm", "dgamma", "dpois", "dbeta")
NUMBERS = (0.0, 1.0, 2.0, 0.5, 10.0, 3.25, 0.0015, 1e-08)
BINARY = ("+", "-", "*", "/", "^", "<", "<=", "==", "!=", "&&", "||")


def test_parse_pump_structure():
    """Loops, stochastic and deterministic declarations keep their order and lines."""
    ast = parse_model(
        "for (i in 1:N) {\n"
        "  theta[i] ~ dgamma(alpha, beta)\n"
        "  lambda[i] <- theta[i] * t[i]\n"
        "  x[i] ~ dpois(lambda[i])\n"
        "}\n"
        "alpha ~ dexp(1.0)\n"
    )
    loop, alpha = ast.declarations
    assert isinstance(loop, ForLoop)
    assert loop.var == "i"
    assert [d.target.name for d in loop.body] == ["theta", "lambda", "x"]
    assert [d.kind for d in loop.body] == [STOCHASTIC, DETERMINISTIC, STOCHASTIC]
    assert loop.body[1].line == 3
    assert alpha.rhs == DistributionCall("dexp", (Argument(None, Number(1.0)),))


def test_model_block_wrapper_is_optional():
    """A JAGS-style ``model { ... }`` wrapper parses to the same program."""
    body = "mu ~ dnorm(0, 0.01)\ny <- mu + 1\n"
    assert parse_model("model {\n" + body + "}\n") == parse_model(body)


def test_precedence_and_associativity():
    assert parse_expression("-x^2") == UnaryOp("-", BinaryOp("^", Variable("x"), Number(2.0)))
    assert parse_expression("2^-1") == BinaryOp("^", Number(2.0), UnaryOp("-", Number(1.0)))
    assert parse_expression("a^b^c") == BinaryOp(
        "^", Variable("a"), BinaryOp("^", Variable("b"), Variable("c"))
    )
    assert parse_expression("a - b - c") == BinaryOp(
        "-", BinaryOp("-", Variable("a"), Variable("b")), Variable("c")
    )
    assert parse_expression("a + b * c") == BinaryOp(
        "+", Variable("a"), BinaryOp("*", Variable("b"), Variable("c"))
    )


def test_named_arguments_and_semicolons():
    ast = parse_model("theta ~ dgamma(shape = a, scale = 1 / b); y <- 2 * theta")
    first, second = ast.declarations
    assert first.rhs.named
    assert [arg.name for arg in first.rhs.args] == ["shape", "scale"]
    assert second.kind == DETERMINISTIC


def test_if_else_condition():
    ast = parse_model("if (K > 1) {\n  y <- 1\n} else {\n  y <- 2\n}\n")
    (statement,) = ast.declarations
    assert isinstance(statement, IfElse)
    assert statement.condition == BinaryOp(">", Variable("K"), Number(1.0))
    assert len(statement.then_body) == len(statement.else_body) == 1


def test_parse_node_name():
    node = parse_node_name("theta[1:3]")
    assert node == Variable("theta", (Range(Number(1.0), Number(3.0)),))
    assert parse_node_name("y[2, 3]").indices == (Number(2.0), Number(3.0))
    with pytest.raises(ParseError):
        parse_node_name("a + b")


@pytest.mark.parametrize(
    "text, line, token",
    [
        ("x ~ dnorm(0, 1", 0, ""),
        ("x ~ dnorm(0, 1)\ny <- * 2", 2, "*"),
        ("x <- a $ b", 1, "$"),
        ("x ~ dnorm(mu = 1, mu = 2)", 1, "mu"),
        ("y[1.5] <- 1", 1, "1.5"),
        ("y[] <- 1", 1, "]"),
        ("x ~ dnorm(0, 1) T(0, )", 1, "T"),
        ("z <- a < b < c", 1, "<"),
        ("}", 1, "}"),
    ],
)
def test_parse_errors_carry_location(text, line, token):
    """Malformed input raises ParseError pointing at the offending token."""
    with pytest.raises(ParseError) as excinfo:
        parse_model(text)
    assert excinfo.value.line == line
    assert excinfo.value.token == token


def test_empty_model_is_an_error():
    with pytest.raises(ParseError):
        parse_model("  # only a comment\n")


# ---------------------------------------------------------------------------
# Round trip over generated programs
# ---------------------------------------------------------------------------


def _random_index(rng, loop_vars):
    choice = rng.integers(3) if loop_vars else 0
    if choice == 0:
        return Number(float(rng.integers(1, 9)))
    var = Variable(str(rng.choice(loop_vars)))
    if choice == 1:
        return var
    return BinaryOp(str(rng.choice(["+", "-", "*"])), var, Number(float(rng.integers(1, 4))))


def _random_variable(rng, loop_vars):
    name = str(rng.choice(NAMES))
    if rng.random() < 0.5:
        return Variable(name)
    items = []
    for _ in range(rng.integers(1, 3)):
        if rng.random() < 0.2:
            items.append(Range(Number(1.0), Number(float(rng.integers(2, 6)))))
        else:
            items.append(_random_index(rng, loop_vars))
    return Variable(name, tuple(items))


def _random_expression(rng, loop_vars, depth=0):
    if depth >= 3 or rng.random() < 0.35:
        if rng.random() < 0.5:
            return Number(float(rng.choice(NUMBERS)))
        return _random_variable(rng, loop_vars)
    kind = rng.integers(4)
    if kind == 0:
        return UnaryOp(str(rng.choice(["-", "!"])), _random_expression(rng, loop_vars, depth + 1))
    if kind == 1:
        function = str(rng.choice(FUNCTIONS))
        arity = 2 if function in ("pow", "max") else 1
        return Call(function, tuple(_random_expression(rng, loop_vars, depth + 1) for _ in range(arity)))
    op = str(rng.choice(BINARY))
    return BinaryOp(op, _random_expression(rng, loop_vars, depth + 1), _random_expression(rng, loop_vars, depth + 1))


def _random_statements(rng, loop_vars, depth=0):
    statements = []
    for _ in range(rng.integers(1, 4)):
        roll = rng.random()
        if roll < 0.15 and depth < 2:
            var = "ijk"[len(loop_vars)]
            statements.append(
                ForLoop(
                    var,
                    Number(1.0),
                    Variable(str(rng.choice(["N", "M"]))),
                    tuple(_random_statements(rng, loop_vars + [var], depth + 1)),
                )
            )
        elif roll < 0.25 and depth < 2:
            else_body = tuple(_random_statements(rng, loop_vars, depth + 1)) if rng.random() < 0.5 else ()
            statements.append(
                IfElse(
                    BinaryOp(">", Variable("K"), Number(float(rng.integers(0, 3)))),
                    tuple(_random_statements(rng, loop_vars, depth + 1)),
                    else_body,
                )
            )
        elif roll < 0.6:
            args = []
            named = rng.random() < 0.4
            for position in range(rng.integers(1, 3)):
                name = ("p", "q")[position] if named else None
                args.append(Argument(name, _random_expression(rng, loop_vars)))
            statements.append(
                Declaration(
                    _random_variable(rng, loop_vars),
                    STOCHASTIC,
                    DistributionCall(str(rng.choice(DISTRIBUTIONS)), tuple(args)),
                )
            )
        else:
            statements.append(
                Declaration(_random_variable(rng, loop_vars), DETERMINISTIC, _random_expression(rng, loop_vars))
            )
    return statements


@pytest.mark.parametrize("seed", range(10))
def test_round_trip_generated_models(seed):
    """parse(deparse(ast)) == ast and printing is a fixed point, over 1000 programs."""
    rng = np.random.default_rng(seed)
    for _ in range(100):
        ast = ModelAST(tuple(_random_statements(rng, [])))
        text = deparse_model(ast)
        reparsed = parse_model(text)
        assert reparsed == ast, text
        assert deparse_model(reparsed) == text
