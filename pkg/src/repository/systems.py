"""
System files: parsing into domain objects, canonical serialization and report output.
"""
import csv
import io
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from tokenize import TokenError
from typing import Sequence

from pydantic import BaseModel, ValidationError
from sympy import Expr, Poly, Symbol
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.polys.polyerrors import PolynomialError

from src.conf import messages
from src.conf.config import config
from src.schemas.systems import SystemFileSchema, TermSchema
from src.services.bound import PerturbationSpec
from src.services.exceptions import PolyShiftError, SystemFileError
from src.services.poly import Box, MultiPoly, PolySystem, degree_order
from src.services.splitter import Deformation

logger = logging.getLogger(__name__)

PARAMETER = "t"
_ALLOWED = re.compile(r"^[\w\s.+\-*/^()]*$")
_NAME = re.compile(r"(?<![\w.])[A-Za-z_]\w*")
_ATTRIBUTE = re.compile(r"\.\s*[A-Za-z_]")


@dataclass(frozen=True)
class SystemBundle:
    """
    A parsed system file.

    Equations are sorted by degree; ``order[i]`` is the file position of
    equation ``i``. Perturbation rows, deformation entries and target equations
    follow the same order.
    """
    system: PolySystem
    variables: tuple[str, ...]
    order: tuple[int, ...]
    perturbation: PerturbationSpec | None = None
    t: float | None = None
    deformation: Deformation | None = None
    target: tuple[MultiPoly, ...] | None = None
    box: Box | None = None
    ball_r: float | None = None
    generators: tuple[tuple[int, ...], ...] = ()
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.system.n

    def require_perturbation(self) -> PerturbationSpec:
        if self.perturbation is None:
            raise SystemFileError([messages.NO_PERTURBATION])
        return self.perturbation

    def require_deformation(self) -> Deformation:
        if self.deformation is None:
            raise SystemFileError([messages.NO_DEFORMATION])
        return self.deformation

    def resolve_box(self, default_r: float = 2.0) -> Box:
        if self.box is not None:
            return self.box
        return Box.cube(self.n, self.ball_r if self.ball_r is not None else default_r)

    def perturbed_polys(self, t: float) -> list[MultiPoly]:
        """
        ``f_i + t * F[i][0] * phi`` in the order of ``system.polys``.
        """
        pert = self.require_perturbation()
        return [f + p * t for f, p in zip(self.system.polys, pert.phi_vector())]


def _check_degree(p: MultiPoly, max_degree: int) -> MultiPoly:
    degree = p.total_degree() or 0
    if degree > max_degree:
        raise ValueError(f"total degree {degree} exceeds MAX_DEGREE = {max_degree}")
    return p


def parse_polynomial(text: str, variables: Sequence[str], with_parameter: bool = False,
                     max_degree: int | None = None) -> MultiPoly:
    """
    Parses an expression string such as ``"x1**2 - x2^2 - 1"``.

    :param text: The expression; ``^`` is read as power.
    :type text: str
    :param variables: Variable names in order.
    :type variables: Sequence[str]
    :param with_parameter: Allow the symbol ``t`` as an extra last variable.
    :type with_parameter: bool
    :param max_degree: Largest total degree accepted, defaults to ``MAX_DEGREE``.
    :type max_degree: int | None
    :raises ValueError: If the text has foreign characters, names or attribute access,
        an exponent above ``max_degree``, or is not a polynomial.
    :return: The polynomial in ``len(variables)`` (plus one) variables.
    :rtype: MultiPoly
    """
    max_degree = config.MAX_DEGREE if max_degree is None else max_degree
    names = list(variables) + ([PARAMETER] if with_parameter else [])
    if not _ALLOWED.match(text):
        raise ValueError(f"unsupported characters in {text!r}")
    if _ATTRIBUTE.search(text):
        raise ValueError(f"attribute access is not allowed in {text!r}")
    unknown = {m for m in _NAME.findall(text) if m not in names}
    if unknown:
        raise ValueError(f"unknown symbols {sorted(unknown)} in {text!r}")
    symbols = {name: Symbol(name) for name in names}
    transformations = standard_transformations + (convert_xor,)
    tree = parse_expr(text, local_dict=symbols, transformations=transformations, evaluate=False)
    degree = _degree_bound(tree, max_degree, 1)
    if degree > max_degree:
        raise ValueError(f"degree up to {degree} exceeds MAX_DEGREE = {max_degree} in {text!r}")
    expr = parse_expr(text, local_dict=symbols, transformations=transformations)
    try:
        poly = Poly(expr, *[symbols[name] for name in names])
    except PolynomialError as err:
        raise ValueError(f"{text!r} is not a polynomial: {err}") from err
    return MultiPoly(len(names), [(exp, float(c)) for exp, c in poly.terms()])


def _degree_bound(expr: Expr, max_degree: int, power: int) -> int:
    """
    Upper bound of the total degree of an unevaluated expression.

    ``power`` is the product of the exponents enclosing ``expr``; it may not exceed
    ``max_degree`` even over a numeric base.
    """
    if expr.is_Pow:
        e = expr.exp
        if not e.is_Integer:
            raise ValueError(f"exponent {e} is not an integer")
        power *= max(abs(int(e)), 1)
        if power > max_degree:
            raise ValueError(f"exponent {e} exceeds MAX_DEGREE = {max_degree}")
        return abs(int(e)) * _degree_bound(expr.base, max_degree, power)
    if expr.is_Symbol:
        return 1
    if expr.is_Add:
        return max(_degree_bound(a, max_degree, power) for a in expr.args)
    if expr.is_Mul:
        return sum(_degree_bound(a, max_degree, power) for a in expr.args)
    return 0


def to_multipoly(value: list[TermSchema] | str, variables: Sequence[str], with_parameter: bool = False,
                 max_degree: int | None = None) -> MultiPoly:
    max_degree = config.MAX_DEGREE if max_degree is None else max_degree
    n = len(variables)
    if isinstance(value, str):
        return parse_polynomial(value, variables, with_parameter, max_degree)
    widths = {len(term.exp) for term in value}
    if with_parameter:
        if value and widths != {n + 1}:
            raise ValueError(f"deformation terms need {n + 1} exponents, the last one for {PARAMETER!r}")
        return _check_degree(MultiPoly(n + 1, [(term.exp, term.coeff) for term in value]), max_degree)
    return _check_degree(MultiPoly(n, [(term.exp, term.coeff) for term in value]), max_degree)


def parse_system_document(doc: SystemFileSchema) -> SystemBundle:
    """
    Builds domain objects from a validated system document.

    :param doc: The document.
    :type doc: SystemFileSchema
    :raises SystemFileError: With one ``location: message`` entry per problem.
    :return: The bundle with equations sorted by degree.
    :rtype: SystemBundle
    """
    variables = tuple(doc.variables or [f"x{i + 1}" for i in range(doc.n)])
    if doc.deformation is not None and PARAMETER in variables:
        raise SystemFileError([f"variables: {PARAMETER!r} is reserved for the deformation parameter"])
    errors: list[str] = []

    def convert(value, location: str, with_parameter: bool = False) -> MultiPoly | None:
        try:
            return to_multipoly(value, variables, with_parameter)
        except (ValueError, SyntaxError, TypeError, TokenError) as err:
            errors.append(f"{location}: {err}")
            return None

    polys = [convert(p, f"polynomials.{i}") for i, p in enumerate(doc.polynomials)]
    phi = convert(doc.perturbation.phi, "perturbation.phi") if doc.perturbation else None
    family = [convert(h, f"deformation.H.{i}", True) for i, h in enumerate(doc.deformation.H)] \
        if doc.deformation else []
    target = [convert(p, f"target.{i}") for i, p in enumerate(doc.target)] if doc.target else []
    if errors:
        raise SystemFileError(errors)
    if family and not any(e[-1] for h in family for e in h.support()):
        logger.warning(messages.CONSTANT_DEFORMATION)

    try:
        order = tuple(degree_order(polys))
        system = PolySystem.from_polys(polys, doc.ell)
        pert = None
        if doc.perturbation is not None:
            spec = doc.perturbation
            if spec.F is not None:
                pert = PerturbationSpec(phi=phi, F=tuple(map(tuple, spec.F)), k=spec.k)
            else:
                pert = PerturbationSpec.on_rows(phi, spec.rows or [doc.ell], doc.n, spec.k)
            pert = pert.permuted(order)
        deformation = None
        if doc.deformation is not None:
            support = None
            if doc.deformation.support is not None:
                support = tuple(tuple(tuple(e) for e in doc.deformation.support[i]) for i in order)
            deformation = Deformation(
                family=tuple(family[i] for i in order),
                magnitude=doc.deformation.t,
                support_spec=support,
                seed=doc.seed,
            )
        box = Box(doc.box.lo, doc.box.hi) if doc.box is not None else None
    except (PolyShiftError, ValueError, IndexError) as err:
        raise SystemFileError([str(err)]) from err

    bundle = SystemBundle(
        system=system,
        variables=variables,
        order=order,
        perturbation=pert,
        t=doc.perturbation.t if doc.perturbation else None,
        deformation=deformation,
        target=tuple(target[i] for i in order) if target else None,
        box=box,
        ball_r=doc.ball.r if doc.ball else None,
        generators=tuple(tuple(g) for g in doc.generators or []),
        seed=doc.seed,
    )
    logger.debug("parsed system with n=%d, degrees %s", system.n, system.degrees)
    return bundle


def parse_system_data(data: dict) -> SystemBundle:
    try:
        doc = SystemFileSchema.model_validate(data)
    except ValidationError as err:
        raise SystemFileError([
            f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in err.errors()
        ]) from err
    return parse_system_document(doc)


def load_system_file(path: str | Path) -> SystemBundle:
    """
    Reads and validates a JSON system file.

    :param path: File path.
    :type path: str | Path
    :raises SystemFileError: For unreadable files, JSON syntax errors (with line
        numbers) and schema violations (with field paths).
    :return: The parsed bundle.
    :rtype: SystemBundle
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise SystemFileError([f"{path}: {err.strerror or err}"]) from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SystemFileError([f"line {err.lineno}, column {err.colno}: {err.msg}"]) from err
    return parse_system_data(data)


def poly_to_terms(p: MultiPoly) -> list[dict]:
    return [{"coeff": c, "exp": list(e)} for e, c in p.items()]


def serialize_bundle(bundle: SystemBundle) -> dict:
    """
    Canonical document: term lists, equations in sorted order, explicit ``F``.
    """
    doc: dict = {
        "n": bundle.n,
        "variables": list(bundle.variables),
        "polynomials": [poly_to_terms(p) for p in bundle.system.polys],
        "ell": bundle.system.ell,
    }
    if bundle.perturbation is not None:
        doc["perturbation"] = {
            "phi": poly_to_terms(bundle.perturbation.phi),
            "F": [list(row) for row in bundle.perturbation.F],
            "k": bundle.perturbation.k,
            "t": bundle.t,
        }
    if bundle.deformation is not None:
        d = bundle.deformation
        doc["deformation"] = {
            "H": [poly_to_terms(p) for p in d.family],
            "t": d.magnitude,
            "support": [[list(e) for e in row] for row in d.support_spec] if d.support_spec else None,
        }
    if bundle.target is not None:
        doc["target"] = [poly_to_terms(p) for p in bundle.target]
    if bundle.box is not None:
        doc["box"] = {"lo": list(bundle.box.lo), "hi": list(bundle.box.hi)}
    if bundle.ball_r is not None:
        doc["ball"] = {"r": bundle.ball_r}
    if bundle.generators:
        doc["generators"] = [list(g) for g in bundle.generators]
    if bundle.seed is not None:
        doc["seed"] = bundle.seed
    return doc


def rows_to_csv(rows: list[dict]) -> str:
    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return buffer.getvalue()


def write_report(payload: BaseModel, out: str | Path | None = None, fmt: str = "json",
                 rows: list[dict] | None = None) -> str:
    """
    Renders a report as JSON, or ``rows`` as CSV, into ``out`` when given.

    :return: The rendered text.
    :rtype: str
    """
    text = rows_to_csv(rows or []) if fmt == "csv" else payload.model_dump_json(indent=2)
    if out is not None:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info("report written to %s", path)
    return text
