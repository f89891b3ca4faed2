"""
Piecewise scalar functions given as expression strings over an interval partition

Expressions are parsed by a small recursive-descent parser into an immutable
tree, differentiated symbolically and evaluated with numpy over arrays.
A PartitionedFunction is u = sum_i u_i * chi(Omega_i) on an open interval.
"""

import re
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .data import ValidationReport
from .errors import (
    AmbiguousPointError,
    DomainError,
    EvaluationDomainError,
    ExpressionSyntaxError,
    InversionError,
    SingularPointError,
    UnknownIdentifierError,
)
from .utils import logger

DEFAULT_INVERSION_TOL = 1e-12
MAX_ITERATIONS = 200
VALIDATION_GRID = 257
ONTO_TOL = 1e-9
KNOT_TOL = 1e-12
SINGULAR_SLOPE = 1e-14

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")
CONSTANTS = {"pi": float(np.pi), "e": float(np.e)}

_EPS = float(np.finfo(float).eps)
_TINY = float(np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    """neg, sign, or one of FUNCTIONS (sign only appears in derivatives of abs)"""

    op: str
    arg: "ExpressionAst"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "ExpressionAst"
    right: "ExpressionAst"


ExpressionAst = Union[Const, Var, Unary, Binary]


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


def _tokenize(source: str) -> list:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(source, pos)
        if not match or match.lastgroup is None:
            offset = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExpressionSyntaxError(
                f"Unexpected character {source[offset]!r}",
                offset,
                {"number", "identifier", "operator"},
            )
        kind = match.lastgroup
        text = match.group(kind)
        tokens.append(_Token(kind, "^" if text == "**" else text, match.start(kind)))
        pos = match.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


_OPERAND_START = frozenset({"number", "identifier", "(", "-", "+"})


class _Parser:
    """
    expr    := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | CONST | VAR | FUNC '(' expr ')' | '(' expr ')'
    """

    def __init__(self, source: str, variable: str):
        self.source = source
        self.variable = variable
        self.tokens = _tokenize(source)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _is(self, *texts) -> bool:
        return self.current.kind == "op" and self.current.text in texts

    def _expect(self, text: str):
        if not self._is(text):
            raise ExpressionSyntaxError(
                f"Unexpected {self._describe(self.current)}",
                self.current.offset,
                {text},
            )
        self._advance()

    @staticmethod
    def _describe(token: _Token) -> str:
        return "end of input" if token.kind == "end" else f"token {token.text!r}"

    def parse(self) -> ExpressionAst:
        tree = self._sum()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(
                f"Unexpected {self._describe(self.current)}",
                self.current.offset,
                {"+", "-", "*", "/", "^", "end of input"},
            )
        return tree

    def _sum(self) -> ExpressionAst:
        tree = self._product()
        while self._is("+", "-"):
            op = self._advance().text
            tree = Binary(op, tree, self._product())
        return tree

    def _product(self) -> ExpressionAst:
        tree = self._unary()
        while self._is("*", "/"):
            op = self._advance().text
            tree = Binary(op, tree, self._unary())
        return tree

    def _unary(self) -> ExpressionAst:
        if self._is("-"):
            self._advance()
            return Unary("neg", self._unary())
        if self._is("+"):
            self._advance()
            return self._unary()
        return self._power()

    def _power(self) -> ExpressionAst:
        base = self._primary()
        if not self._is("^"):
            return base
        self._advance()
        offset = self.current.offset
        exponent = self._unary()
        if not is_constant(exponent):
            raise ExpressionSyntaxError(
                "Exponent must be a constant", offset, {"constant exponent"}
            )
        return Binary("^", base, Const(float(evaluate_expression(exponent, 0.0))))

    def _primary(self) -> ExpressionAst:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.kind == "ident":
            self._advance()
            if token.text in FUNCTIONS:
                self._expect("(")
                argument = self._sum()
                self._expect(")")
                return Unary(token.text, argument)
            if token.text == self.variable:
                return Var(token.text)
            if token.text in CONSTANTS:
                return Const(CONSTANTS[token.text])
            raise UnknownIdentifierError(token.text, token.offset)
        if self._is("("):
            self._advance()
            tree = self._sum()
            self._expect(")")
            return tree
        raise ExpressionSyntaxError(
            f"Unexpected {self._describe(token)}", token.offset, _OPERAND_START
        )


def parse_expression(source: str, variable: str = "x") -> ExpressionAst:
    """Parse an arithmetic expression in a single variable"""
    if not source or not source.strip():
        raise ExpressionSyntaxError("Empty expression", 0, _OPERAND_START)
    return _Parser(source, variable).parse()


def is_constant(tree: ExpressionAst) -> bool:
    match tree:
        case Const():
            return True
        case Var():
            return False
        case Unary(arg=arg):
            return is_constant(arg)
        case Binary(left=left, right=right):
            return is_constant(left) and is_constant(right)
    raise TypeError(f"Not an expression tree: {tree!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_UNARY_NUMPY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "sign": np.sign,
    "neg": np.negative,
}


def _eval(tree: ExpressionAst, x: np.ndarray, strict: bool) -> np.ndarray:
    match tree:
        case Const(value=value):
            return np.full(x.shape, value)
        case Var():
            return x
        case Unary(op="log", arg=arg):
            inner = _eval(arg, x, strict)
            if strict and np.any(inner <= 0):
                raise EvaluationDomainError("log of a non-positive argument")
            return np.log(inner)
        case Unary(op="sqrt", arg=arg):
            inner = _eval(arg, x, strict)
            if strict and np.any(inner < 0):
                raise EvaluationDomainError("sqrt of a negative argument")
            return np.sqrt(inner)
        case Unary(op=op, arg=arg):
            return _UNARY_NUMPY[op](_eval(arg, x, strict))
        case Binary(op="/", left=left, right=right):
            denominator = _eval(right, x, strict)
            if strict and np.any(denominator == 0):
                raise EvaluationDomainError("division by zero")
            return _eval(left, x, strict) / denominator
        case Binary(op="^", left=left, right=Const(value=power)):
            base = _eval(left, x, strict)
            if strict and not float(power).is_integer() and np.any(base < 0):
                raise EvaluationDomainError("fractional power of a negative base")
            if strict and power < 0 and np.any(base == 0):
                raise EvaluationDomainError("division by zero")
            return np.power(base, power)
        case Binary(op=op, left=left, right=right):
            a, b = _eval(left, x, strict), _eval(right, x, strict)
            match op:
                case "+":
                    return a + b
                case "-":
                    return a - b
                case "*":
                    return a * b
    raise TypeError(f"Not an expression tree: {tree!r}")


def evaluate_expression(tree: ExpressionAst, at):
    """Evaluate at a scalar or an array; non-finite results raise EvaluationDomainError"""
    scalar = np.ndim(at) == 0
    x = np.asarray(at, dtype=float)
    with np.errstate(all="ignore"):
        result = _eval(tree, x, strict=True)
    if not np.all(np.isfinite(result)):
        raise EvaluationDomainError("expression evaluates to a non-finite value")
    return float(result) if scalar else np.array(result, dtype=float)


def _evaluate_raw(tree: ExpressionAst, x) -> np.ndarray:
    """Permissive evaluation: domain violations come back as nan/inf"""
    with np.errstate(all="ignore"):
        return np.asarray(_eval(tree, np.asarray(x, dtype=float), strict=False), dtype=float)


# ---------------------------------------------------------------------------
# Symbolic differentiation, with constant folding
# ---------------------------------------------------------------------------


def _num(tree) -> Optional[float]:
    return tree.value if isinstance(tree, Const) else None


def _neg(a):
    if _num(a) is not None:
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def _add(a, b):
    if _num(a) == 0:
        return b
    if _num(b) == 0:
        return a
    if _num(a) is not None and _num(b) is not None:
        return Const(a.value + b.value)
    return Binary("+", a, b)


def _sub(a, b):
    if _num(b) == 0:
        return a
    if _num(a) == 0:
        return _neg(b)
    if _num(a) is not None and _num(b) is not None:
        return Const(a.value - b.value)
    return Binary("-", a, b)


def _mul(a, b):
    if _num(a) == 0 or _num(b) == 0:
        return Const(0.0)
    if _num(a) == 1:
        return b
    if _num(b) == 1:
        return a
    if _num(a) is not None and _num(b) is not None:
        return Const(a.value * b.value)
    if _num(b) is not None:
        a, b = b, a
    return Binary("*", a, b)


def _div(a, b):
    if _num(a) == 0:
        return Const(0.0)
    if _num(b) == 1:
        return a
    if _num(a) is not None and _num(b) not in (None, 0):
        return Const(a.value / b.value)
    return Binary("/", a, b)


def _pow(a, power: float):
    if power == 0:
        return Const(1.0)
    if power == 1:
        return a
    if _num(a) is not None:
        return Const(float(a.value**power))
    return Binary("^", a, Const(float(power)))


def differentiate(tree: ExpressionAst) -> ExpressionAst:
    """Symbolic derivative with respect to the expression's variable"""
    match tree:
        case Const():
            return Const(0.0)
        case Var():
            return Const(1.0)
        case Unary(op=op, arg=arg):
            inner = differentiate(arg)
            match op:
                case "neg":
                    return _neg(inner)
                case "sin":
                    return _mul(Unary("cos", arg), inner)
                case "cos":
                    return _neg(_mul(Unary("sin", arg), inner))
                case "exp":
                    return _mul(tree, inner)
                case "log":
                    return _div(inner, arg)
                case "sqrt":
                    return _div(inner, _mul(Const(2.0), tree))
                case "abs":
                    return _mul(Unary("sign", arg), inner)
                case "sign":
                    return Const(0.0)
        case Binary(op=op, left=left, right=right):
            match op:
                case "+":
                    return _add(differentiate(left), differentiate(right))
                case "-":
                    return _sub(differentiate(left), differentiate(right))
                case "*":
                    return _add(
                        _mul(differentiate(left), right),
                        _mul(left, differentiate(right)),
                    )
                case "/":
                    numerator = _sub(
                        _mul(differentiate(left), right),
                        _mul(left, differentiate(right)),
                    )
                    return _div(numerator, _pow(right, 2.0))
                case "^":
                    power = right.value
                    return _mul(
                        _mul(Const(power), _pow(left, power - 1.0)),
                        differentiate(left),
                    )
    raise TypeError(f"Not an expression tree: {tree!r}")


def substitute(tree: ExpressionAst, replacement: ExpressionAst) -> ExpressionAst:
    """Replace the variable by another tree"""
    match tree:
        case Const():
            return tree
        case Var():
            return replacement
        case Unary(op=op, arg=arg):
            return Unary(op, substitute(arg, replacement))
        case Binary(op=op, left=left, right=right):
            return Binary(op, substitute(left, replacement), substitute(right, replacement))
    raise TypeError(f"Not an expression tree: {tree!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def format_expression(tree: ExpressionAst) -> str:
    """Canonical text form, parenthesized only where precedence needs it"""

    def wrap(node, minimum, strict=False):
        text = format_expression(node)
        level = _level(node)
        if level < minimum or (strict and level == minimum):
            return f"({text})"
        return text

    match tree:
        case Const(value=value):
            text = repr(float(value))
            return text[:-2] if text.endswith(".0") else text
        case Var(name=name):
            return name
        case Unary(op="neg", arg=arg):
            return f"-{wrap(arg, _PRECEDENCE['neg'])}"
        case Unary(op=op, arg=arg):
            return f"{op}({format_expression(arg)})"
        case Binary(op="^", left=left, right=right):
            return f"{wrap(left, _PRECEDENCE['^'], strict=True)}^{wrap(right, 5)}"
        case Binary(op=op, left=left, right=right):
            level = _PRECEDENCE[op]
            return f"{wrap(left, level)} {op} {wrap(right, level, strict=op in '-/')}"
    raise TypeError(f"Not an expression tree: {tree!r}")


def _level(tree) -> int:
    match tree:
        case Const(value=value):
            return 3 if value < 0 else 5
        case Var() | Unary(op="sin" | "cos" | "exp" | "log" | "sqrt" | "abs" | "sign"):
            return 5
        case Unary(op="neg"):
            return _PRECEDENCE["neg"]
        case Binary(op=op):
            return _PRECEDENCE[op]
    return 0


# ---------------------------------------------------------------------------
# Pieces and partitioned functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Piece:
    """u_i on the open cell (left, right), with cached derivative and image closure"""

    left: float
    right: float
    source: str
    expr: ExpressionAst
    derivative: ExpressionAst
    direction: int
    image: Tuple[float, float]
    singular_values: Tuple[float, ...] = ()

    @classmethod
    def build(cls, left: float, right: float, expression) -> "Piece":
        left, right = float(left), float(right)
        if isinstance(expression, str):
            source, tree = expression, parse_expression(expression, "x")
        else:
            source, tree = format_expression(expression), expression
        derivative = differentiate(tree)
        if not left < right:
            # Kept so validation can report it; nothing numerical is derived.
            return cls(left, right, source, tree, derivative, 0, (np.nan, np.nan))

        ends = np.array([left, right])
        end_values = _evaluate_raw(tree, ends)
        for k in range(2):
            if not np.isfinite(end_values[k]):
                nudged = ends[k] + (1 if k == 0 else -1) * KNOT_TOL * (right - left)
                end_values[k] = _evaluate_raw(tree, nudged)
        grid = _interior_grid(left, right)
        values = np.concatenate([end_values, _evaluate_raw(tree, grid)])
        finite = values[np.isfinite(values)]
        image = (float(finite.min()), float(finite.max())) if finite.size else (np.nan, np.nan)

        if is_constant(tree):
            direction = 0
        elif end_values[1] != end_values[0] and np.all(np.isfinite(end_values)):
            direction = 1 if end_values[1] > end_values[0] else -1
        else:
            slope = float(_evaluate_raw(derivative, 0.5 * (left + right)))
            direction = int(np.sign(slope)) if np.isfinite(slope) else 0

        singular = []
        if direction != 0:
            slopes = _evaluate_raw(derivative, ends)
            for k in range(2):
                if np.isfinite(slopes[k]) and abs(slopes[k]) <= SINGULAR_SLOPE:
                    singular.append(float(end_values[k]))
        return cls(left, right, source, tree, derivative, direction, image, tuple(sorted(set(singular))))

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def is_constant(self) -> bool:
        return is_constant(self.expr)

    def __call__(self, x):
        return evaluate_expression(self.expr, x)


def _interior_grid(left: float, right: float, count: int = VALIDATION_GRID) -> np.ndarray:
    return np.linspace(left, right, count + 2)[1:-1]


@dataclass(frozen=True)
class PartitionedFunction:
    """u = sum_i u_i chi(Omega_i) on Omega = (a, b); pieces are kept sorted by left end"""

    domain: Tuple[float, float]
    pieces: Tuple[Piece, ...]
    kind: str = "invertible"  # or "constant"

    @classmethod
    def from_pieces(cls, domain, pieces: Sequence, kind: str = "invertible") -> "PartitionedFunction":
        """pieces: iterable of ((a_i, b_i), expression) pairs or ready Piece objects"""
        built = [
            piece if isinstance(piece, Piece) else Piece.build(piece[0][0], piece[0][1], piece[1])
            for piece in pieces
        ]
        built.sort(key=lambda piece: (piece.left, piece.right))
        a, b = domain
        return cls((float(a), float(b)), tuple(built), kind)

    @property
    def measure(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def knots(self) -> Tuple[float, ...]:
        return tuple(piece.left for piece in self.pieces[1:])

    @property
    def image(self) -> Tuple[float, float]:
        return (
            min(piece.image[0] for piece in self.pieces),
            max(piece.image[1] for piece in self.pieces),
        )


def evaluate(u: PartitionedFunction, x: float) -> float:
    """u(x) for x interior to a piece"""
    a, b = u.domain
    if not a < x < b:
        raise DomainError(f"x={x!r} lies outside the domain ({a}, {b})")
    for piece in u.pieces:
        if piece.left < x < piece.right:
            return piece(x)
    raise AmbiguousPointError(f"x={x!r} is a partition knot; use interior points")


def evaluate_many(u: PartitionedFunction, xs) -> np.ndarray:
    """Vectorized evaluation; knots (measure zero) belong to the right-hand piece"""
    xs = np.asarray(xs, dtype=float)
    lefts = np.array([piece.left for piece in u.pieces])
    owner = np.clip(np.searchsorted(lefts, xs, side="right") - 1, 0, len(u.pieces) - 1)
    result = np.empty_like(xs)
    for i, piece in enumerate(u.pieces):
        mask = owner == i
        if np.any(mask):
            result[mask] = evaluate_expression(piece.expr, xs[mask])
    return result


def validate(u: PartitionedFunction, onto_K=None) -> ValidationReport:
    """Check the partition, per-piece shape and (optionally) the onto condition"""
    report = ValidationReport()
    a, b = u.domain
    report.add("domain.positive_measure", b > a, "partition", f"M = {b - a!r}")
    report.add("partition.nonempty", len(u.pieces) > 0, "partition")
    if not u.pieces or not b > a:
        return report

    slack = KNOT_TOL * max(1.0, abs(a), abs(b))
    for i, piece in enumerate(u.pieces):
        report.add(
            f"piece[{i}].interval",
            piece.left < piece.right,
            "partition",
            f"({piece.left!r}, {piece.right!r})",
        )
    inside = all(piece.left >= a - slack and piece.right <= b + slack for piece in u.pieces)
    report.add("partition.within_domain", inside, "partition")

    overlaps, gaps = [], []
    for i, (first, second) in enumerate(zip(u.pieces, u.pieces[1:])):
        if first.right > second.left + slack:
            overlaps.append(f"pieces {i} and {i + 1} intersect on ({second.left!r}, {first.right!r})")
        elif first.right < second.left - slack:
            gaps.append(f"gap ({first.right!r}, {second.left!r})")
    if abs(u.pieces[0].left - a) > slack:
        gaps.append(f"left end {u.pieces[0].left!r} != {a!r}")
    if abs(u.pieces[-1].right - b) > slack:
        gaps.append(f"right end {u.pieces[-1].right!r} != {b!r}")
    report.add("partition.disjoint", not overlaps, "partition", "; ".join(overlaps))
    report.add("partition.covering", not gaps, "partition", "; ".join(gaps))

    for i, piece in enumerate(u.pieces):
        if not piece.left < piece.right:
            continue
        if u.kind == "constant":
            report.add(f"piece[{i}].constant", piece.is_constant, "shape", piece.source)
            continue
        grid = _interior_grid(piece.left, piece.right)
        values = _evaluate_raw(piece.expr, grid)
        report.add(f"piece[{i}].finite", bool(np.all(np.isfinite(values))), "shape", piece.source)
        slopes = _evaluate_raw(piece.derivative, grid)
        monotone = bool(
            np.all(np.isfinite(slopes)) and (np.all(slopes > 0) or np.all(slopes < 0))
        )
        detail = "" if monotone else f"derivative of {piece.source} changes sign or vanishes"
        report.add(f"piece[{i}].monotone", monotone, "shape", detail)

    if onto_K is not None:
        c, d = onto_K
        tol_c, tol_d = ONTO_TOL * max(1.0, abs(c)), ONTO_TOL * max(1.0, abs(d))
        for i, piece in enumerate(u.pieces):
            lo, hi = piece.image
            within = bool(lo >= c - tol_c and hi <= d + tol_d)
            report.add(f"piece[{i}].within_support", within, "support", f"image [{lo!r}, {hi!r}]")
            if u.kind != "constant":
                onto = bool(abs(lo - c) <= tol_c and abs(hi - d) <= tol_d)
                report.add(f"piece[{i}].onto", onto, "onto", f"image [{lo!r}, {hi!r}] vs K [{c!r}, {d!r}]")

    for check in report.failures:
        logger.debug(f"Validation failure {check.name}: {check.detail}")
    return report


def reflect(u: PartitionedFunction) -> PartitionedFunction:
    """x -> u(a + b - x); the image measure is unchanged"""
    a, b = u.domain
    mirror = Binary("-", Const(a + b), Var("x"))
    pieces = [
        Piece.build(a + b - piece.right, a + b - piece.left, substitute(piece.expr, mirror))
        for piece in u.pieces
    ]
    return PartitionedFunction.from_pieces(u.domain, pieces, u.kind)


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------


def _check_invertible(p: Piece):
    if p.direction == 0:
        raise InversionError(f"Piece {p.source} on ({p.left}, {p.right}) is not strictly monotone")


def _solve(p: Piece, ys: np.ndarray, tol: float) -> np.ndarray:
    """Bisection-safeguarded Newton for u_i(x) = y, vectorized over y in the image"""
    lo_img, hi_img = p.image
    ys = np.clip(np.asarray(ys, dtype=float), lo_img, hi_img)
    s = float(p.direction)
    result = np.empty_like(ys)

    start, end = (p.left, p.right) if s > 0 else (p.right, p.left)
    at_lo, at_hi = ys == lo_img, ys == hi_img
    result[at_lo] = start
    result[at_hi] = end
    pending = np.flatnonzero(~(at_lo | at_hi))
    if pending.size == 0:
        return result

    y = ys[pending]
    scale = tol * np.maximum(1.0, np.abs(y))
    lo = np.full(y.shape, p.left)
    hi = np.full(y.shape, p.right)
    x = 0.5 * (lo + hi)
    dx = hi - lo
    dx_old = dx.copy()
    for iteration in range(MAX_ITERATIONS):
        f = s * (_evaluate_raw(p.expr, x) - y)
        df = s * _evaluate_raw(p.derivative, x)
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        with np.errstate(all="ignore"):
            step = f / df
        newton = x - step
        accept = np.isfinite(newton) & (df > 0) & (newton > lo) & (newton < hi)
        # Newton only while each step is at most half the one before last
        accept &= np.abs(step) <= 0.5 * np.abs(dx_old)
        floor = 8 * _EPS * np.maximum(np.abs(x), _TINY)
        residual_ok = np.abs(f) <= scale
        tiny_step = (df > 0) & np.isfinite(step) & (np.abs(step) <= floor)
        settled = residual_ok & ((f == 0) | tiny_step)
        collapsed = (hi - lo) <= floor
        # residual attainable in double precision at a steep end
        resolvable = np.abs(f) <= 4 * np.abs(df) * np.maximum(hi - lo, floor)
        failed = collapsed & ~residual_ok & ~resolvable
        if np.any(failed):
            bad = float(y[np.flatnonzero(failed)[0]])
            raise InversionError(f"Bracket collapsed without a root for y={bad!r} on {p.source}")
        done = settled | collapsed
        if np.any(done):
            result[pending[done]] = x[done]
            keep = ~done
            pending, y, scale = pending[keep], y[keep], scale[keep]
            lo, hi, x = lo[keep], hi[keep], x[keep]
            dx, dx_old = dx[keep], dx_old[keep]
            step = step[keep]
            accept, newton = accept[keep], newton[keep]
            if pending.size == 0:
                logger.debug(f"Inverted {p.source} in {iteration + 1} iterations")
                return result
        dx_old, dx = dx, np.where(accept, step, 0.5 * (hi - lo))
        x = np.where(accept, newton, 0.5 * (lo + hi))
    raise InversionError(
        f"No convergence within {MAX_ITERATIONS} iterations on {p.source} "
        f"for {pending.size} value(s), e.g. y={float(y[0])!r}"
    )


def _check_in_image(p: Piece, y: float):
    lo, hi = p.image
    slack = 1e-12 * max(1.0, abs(y))
    if not (np.isfinite(y) and lo - slack <= y <= hi + slack):
        raise DomainError(f"y={y!r} lies outside the image [{lo!r}, {hi!r}] of {p.source}")


def invert_piece(p: Piece, y: float, tol: float = DEFAULT_INVERSION_TOL) -> float:
    """x in [a_i, b_i] with |u_i(x) - y| <= tol * max(1, |y|)"""
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_invertible(p)
    _check_in_image(p, y)
    return float(_solve(p, np.array([y]), tol)[0])


def invert_many(p: Piece, ys, tol: float = DEFAULT_INVERSION_TOL) -> np.ndarray:
    _check_invertible(p)
    ys = np.asarray(ys, dtype=float)
    if ys.size:
        _check_in_image(p, float(ys.min()))
        _check_in_image(p, float(ys.max()))
    return _solve(p, ys, tol)


def inverse_derivative(p: Piece, y: float) -> float:
    """|(u_i^{-1})'(y)| = 1/|u_i'(u_i^{-1}(y))|"""
    x = invert_piece(p, y)
    slope = abs(float(_evaluate_raw(p.derivative, x)))
    if not np.isfinite(slope) or slope == 0:
        raise SingularPointError(y)
    return 1.0 / slope


def inverse_derivative_values(p: Piece, ys) -> np.ndarray:
    """Vectorized inverse derivative: 0 outside the image, +inf where u_i' vanishes"""
    _check_invertible(p)
    ys = np.asarray(ys, dtype=float)
    lo, hi = p.image
    slack = KNOT_TOL * max(1.0, abs(lo), abs(hi))
    values = np.zeros_like(ys)
    inside = (ys >= lo - slack) & (ys <= hi + slack)
    if np.any(inside):
        x = _solve(p, ys[inside], DEFAULT_INVERSION_TOL)
        slope = np.abs(_evaluate_raw(p.derivative, x))
        with np.errstate(divide="ignore"):
            values[inside] = np.where(slope > 0, 1.0 / slope, np.inf)
    return values
