"""
Field elements shared by every module.

Exact kinds hold sympy domain elements (QQ backed by gmpy2, QQ_I Gaussian
rationals); float kinds hold Python floats and complexes. Arrays of any kind
are numpy arrays, object dtype for exact kinds.
"""
import cmath
import math
import numbers
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from sympy import QQ, QQ_I, integer_nthroot
from sympy.polys.factortools import dup_factor_list

from multiform.config import load_config
from multiform.errors import MultiFormError
from multiform.logging_config import setup_logging

log = setup_logging(__name__)

_COMPLEX_SPLIT = re.compile(r'(?<=[0-9.)])(?<![eE])[+-]')


@dataclass(frozen=True)
class TolerancePolicy:
    """
    Float comparison policy: |a - b| <= abs_tol + rel_tol * scale.

    Exact kinds ignore it and compare structurally.
    """
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise MultiFormError(f"{name} must be finite and nonnegative", "INVALID_SPEC", field=name)

    @classmethod
    def default(cls):
        config = load_config()
        return cls(rel_tol=config.rel_tol, abs_tol=config.abs_tol)

    def threshold(self, scale):
        return self.abs_tol + self.rel_tol * scale


def _is_int(value):
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def _split_complex(text):
    """Split 'a+bi' / 'a+b*i' / 'bi' into (real, imaginary) strings."""
    body = text.strip().replace(" ", "")
    if not body.endswith(("i", "j")):
        return body, None
    body = body[:-1].rstrip("*")
    parts = list(_COMPLEX_SPLIT.finditer(body))
    if not parts:
        if body in ("", "+", "-"):
            body += "1"
        return "0", body
    cut = parts[-1].start()
    real, imag = body[:cut], body[cut:]
    if imag in ("+", "-"):
        imag += "1"
    return real, imag


def _parse_rational(text):
    try:
        fraction = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise MultiFormError(f"Cannot parse rational: {text!r}", "PARSE_ERROR", text=text)
    return QQ(fraction.numerator, fraction.denominator)


def _format_rational(value):
    return f"{QQ.numer(value)}/{QQ.denom(value)}"


def _exact_root_rational(value, k):
    negative = value < 0
    if negative and k % 2 == 0:
        raise MultiFormError(f"{_format_rational(value)} has no real root of even order {k}", "NO_ROOT_IN_FIELD")
    numer, numer_exact = integer_nthroot(abs(int(QQ.numer(value))), k)
    denom, denom_exact = integer_nthroot(int(QQ.denom(value)), k)
    if not (numer_exact and denom_exact):
        raise MultiFormError(f"{_format_rational(value)} has no rational root of order {k}", "NO_ROOT_IN_FIELD")
    root = QQ(numer, denom)
    return -root if negative else root


def _exact_root_gaussian(value, k):
    # linear factors of x**k - value over QQ_I are exactly the roots in the field
    poly = [QQ_I.one] + [QQ_I.zero] * (k - 1) + [-value]
    _, factors = dup_factor_list(poly, QQ_I)
    roots = [-factor[1] / factor[0] for factor, _ in factors if len(factor) == 2]
    if not roots:
        raise MultiFormError(f"{ScalarKind.QI.format(value)} has no Gaussian rational root of order {k}",
                             "NO_ROOT_IN_FIELD")
    principal = cmath.exp(cmath.log(complex(float(value.x), float(value.y))) / k)
    return max(roots, key=lambda r: (complex(float(r.x), float(r.y)) * principal.conjugate()).real
               / abs(complex(float(r.x), float(r.y))))


class ScalarKind(Enum):
    """Scalar fields: exact rationals, exact Gaussian rationals, float64 and complex128."""
    Q = "Q"
    QI = "Qi"
    R64 = "R64"
    C64 = "C64"

    @property
    def is_exact(self):
        return self in (ScalarKind.Q, ScalarKind.QI)

    @property
    def is_complex(self):
        return self in (ScalarKind.QI, ScalarKind.C64)

    @property
    def dtype(self):
        return {ScalarKind.R64: np.float64, ScalarKind.C64: np.complex128}.get(self, object)

    @property
    def domain(self):
        return {ScalarKind.Q: QQ, ScalarKind.QI: QQ_I}.get(self)

    @property
    def zero(self):
        return self.convert(0)

    @property
    def one(self):
        return self.convert(1)

    def complexified(self):
        return {ScalarKind.Q: ScalarKind.QI, ScalarKind.R64: ScalarKind.C64}.get(self, self)

    def real_kind(self):
        return {ScalarKind.QI: ScalarKind.Q, ScalarKind.C64: ScalarKind.R64}.get(self, self)

    def floating(self):
        return {ScalarKind.Q: ScalarKind.R64, ScalarKind.QI: ScalarKind.C64}.get(self, self)

    def convert(self, value):
        """
        Convert a Python, numpy, fractions or sympy domain value into this kind.

        Raises:
            MultiFormError: INVALID_SCALAR when the value does not fit the kind
        """
        if isinstance(value, Scalar):
            value = value.value
        if isinstance(value, np.generic):
            value = value.item()
        if isinstance(value, str):
            return self.parse(value)
        if self is ScalarKind.Q:
            return self._to_rational(value)
        if self is ScalarKind.QI:
            if QQ_I.of_type(value):
                return value
            if isinstance(value, complex):
                return QQ_I(self._to_rational(value.real, strict=False), self._to_rational(value.imag, strict=False))
            return QQ_I(self._to_rational(value))
        if self is ScalarKind.R64:
            if QQ_I.of_type(value):
                if value.y:
                    raise MultiFormError("Complex value in a real kind", "INVALID_SCALAR", value=str(value))
                value = value.x
            if isinstance(value, complex):
                if value.imag:
                    raise MultiFormError("Complex value in a real kind", "INVALID_SCALAR", value=str(value))
                value = value.real
            result = float(value)
            if not math.isfinite(result):
                raise MultiFormError("Non-finite float", "INVALID_SCALAR", value=result)
            return result
        if QQ_I.of_type(value):
            result = complex(float(value.x), float(value.y))
        else:
            result = complex(value)
        if not cmath.isfinite(result):
            raise MultiFormError("Non-finite complex", "INVALID_SCALAR", value=str(result))
        return result

    @staticmethod
    def _to_rational(value, strict=True):
        if QQ.of_type(value):
            return value
        if _is_int(value):
            return QQ(int(value))
        if isinstance(value, Fraction):
            return QQ(value.numerator, value.denominator)
        if QQ_I.of_type(value):
            if value.y:
                raise MultiFormError("Complex value in a real kind", "INVALID_SCALAR", value=str(value))
            return value.x
        if isinstance(value, float):
            if not math.isfinite(value):
                raise MultiFormError("Non-finite float", "INVALID_SCALAR", value=value)
            fraction = Fraction(value)
            return QQ(fraction.numerator, fraction.denominator)
        if isinstance(value, complex) and not strict:
            return ScalarKind._to_rational(value.real)
        raise MultiFormError(f"Cannot convert {value!r} to an exact rational", "INVALID_SCALAR", value=repr(value))

    def parse(self, text):
        """Parse the interchange string form of a scalar."""
        if not isinstance(text, str):
            raise MultiFormError(f"Scalar must be a string, got {type(text).__name__}", "PARSE_ERROR")
        if self is ScalarKind.Q:
            return _parse_rational(text.strip())
        if self is ScalarKind.R64:
            try:
                return self.convert(float(text))
            except ValueError:
                raise MultiFormError(f"Cannot parse float: {text!r}", "PARSE_ERROR", text=text)
        real, imag = _split_complex(text)
        if self is ScalarKind.QI:
            return QQ_I(_parse_rational(real), _parse_rational(imag or "0"))
        try:
            return self.convert(complex(float(real), float(imag or "0")))
        except ValueError:
            raise MultiFormError(f"Cannot parse complex: {text!r}", "PARSE_ERROR", text=text)

    def format(self, value):
        """Canonical interchange string: 'p/q', 'p/q+r/s*i', repr floats, 'a+bi'."""
        value = self.convert(value)
        if self is ScalarKind.Q:
            return _format_rational(value)
        if self is ScalarKind.QI:
            sign = "-" if value.y < 0 else "+"
            return f"{_format_rational(value.x)}{sign}{_format_rational(abs(value.y))}*i"
        if self is ScalarKind.R64:
            return repr(value)
        sign = "-" if math.copysign(1.0, value.imag) < 0 else "+"
        return f"{value.real!r}{sign}{abs(value.imag)!r}i"

    def array(self, values):
        """Coerce nested sequences or arrays into a numpy array of this kind."""
        source = np.asarray(values, dtype=object) if not isinstance(values, np.ndarray) else values
        if source.dtype == object or self.is_exact:
            converted = np.empty(source.shape, dtype=object)
            for index in np.ndindex(source.shape):
                converted[index] = self.convert(source[index])
            if self.is_exact:
                return converted
            source = converted
        if self is ScalarKind.R64 and np.iscomplexobj(source):
            if np.any(np.imag(source)):
                raise MultiFormError("Complex entries in a real kind", "INVALID_SCALAR")
            source = np.real(source)
        result = np.asarray(source, dtype=self.dtype)
        if not np.all(np.isfinite(result)):
            raise MultiFormError("Non-finite entries", "INVALID_SCALAR")
        return result

    def to_complex(self, value):
        if QQ_I.of_type(value):
            return complex(float(value.x), float(value.y))
        return complex(value)

    def magnitude(self, value):
        return abs(self.to_complex(value))

    def real_part(self, value):
        if self is ScalarKind.QI:
            return value.x
        if self is ScalarKind.C64:
            return value.real
        return value

    def imag_part(self, value):
        if self is ScalarKind.QI:
            return value.y
        if self is ScalarKind.C64:
            return value.imag
        return self.zero

    def make_complex(self, real, imag):
        """Build a value of the complexified kind from two parts of this real kind."""
        if self.is_exact:
            return QQ_I(real, imag)
        return complex(real, imag)

    def is_negligible(self, value, policy, scale=1.0):
        if self.is_exact:
            return not value
        return abs(value) <= policy.threshold(scale)

    def approx_equal(self, a, b, policy):
        if self.is_exact:
            return a == b
        return abs(a - b) <= policy.threshold(max(abs(a), abs(b)))

    def nth_root(self, value, k):
        """
        Return r with r**k == value.

        Float kinds return the principal root (the real root for odd k and
        negative R64 input). Exact Gaussian rationals return the principal
        root if it lies in the field, else the field root nearest to it.
        """
        if not _is_int(k) or k < 1:
            raise MultiFormError(f"Root order must be a positive integer, got {k!r}", "INVALID_SCALAR")
        value = self.convert(value)
        if not value:
            raise MultiFormError("Root of zero requested", "ZERO_INPUT")
        if self is ScalarKind.Q:
            return _exact_root_rational(value, k)
        if self is ScalarKind.QI:
            if not value.y and value.x > 0:
                try:
                    return QQ_I(_exact_root_rational(value.x, k))
                except MultiFormError:
                    pass
            return _exact_root_gaussian(value, k)
        if self is ScalarKind.R64:
            if value < 0 and k % 2 == 0:
                raise MultiFormError(f"{value!r} has no real root of even order {k}", "NO_ROOT_IN_FIELD")
            return math.copysign(abs(value) ** (1.0 / k), value)
        return cmath.exp(cmath.log(value) / k)


@dataclass(frozen=True)
class Scalar:
    """A field element tagged with its kind; canonical after construction."""
    kind: ScalarKind
    value: object

    def __post_init__(self):
        object.__setattr__(self, "value", self.kind.convert(self.value))

    def __str__(self):
        return self.kind.format(self.value)


def _check_same_kind(a, b):
    if a.kind is not b.kind:
        raise MultiFormError(f"Kind mismatch: {a.kind.value} vs {b.kind.value}", "KIND_MISMATCH")


def approx_eq(a, b, policy=None):
    """Structural equality for exact kinds, tolerance comparison for float kinds."""
    _check_same_kind(a, b)
    return a.kind.approx_equal(a.value, b.value, policy or TolerancePolicy.default())


def nth_root(a, k):
    return Scalar(a.kind, a.kind.nth_root(a.value, k))


def parse_scalar(text, kind):
    return Scalar(kind, kind.parse(text))


def format_scalar(a):
    return a.kind.format(a.value)
