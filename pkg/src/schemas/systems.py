from typing import Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class TermSchema(BaseModel):
    coeff: float
    exp: list[int] = Field(min_length=1)

    model_config = ConfigDict(from_attributes=True)  # noqa


# a polynomial is a term list or an expression string over the declared variables
PolynomialField = Union[list[TermSchema], str]


class BoxSchema(BaseModel):
    lo: list[float] = Field(min_length=1)
    hi: list[float] = Field(min_length=1)

    model_config = ConfigDict(from_attributes=True)  # noqa

    @model_validator(mode="after")
    def check_bounds(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("Box intervals must satisfy lo <= hi")
        return self


class BallSchema(BaseModel):
    r: float = Field(gt=0)


class PerturbationSchema(BaseModel):
    phi: PolynomialField
    rows: list[int] | None = None
    F: list[list[float]] | None = None
    k: int | None = Field(default=None, ge=1)
    t: float | None = Field(default=None, ge=0)


class DeformationSchema(BaseModel):
    H: list[PolynomialField] = Field(min_length=1)
    t: float = Field(default=1.0)
    support: list[list[list[int]]] | None = None


class SystemFileSchema(BaseModel):
    n: int = Field(ge=1)
    variables: list[str] | None = None
    polynomials: list[PolynomialField] = Field(min_length=1)
    ell: int = Field(default=1, ge=1)
    perturbation: PerturbationSchema | None = None
    deformation: DeformationSchema | None = None
    target: list[PolynomialField] | None = None
    box: BoxSchema | None = None
    ball: BallSchema | None = None
    generators: list[list[int]] | None = None
    seed: int | None = None

    @model_validator(mode="after")
    def check_shape(self):
        if len(self.polynomials) != self.n:
            raise ValueError(f"expected {self.n} polynomials, got {len(self.polynomials)}")
        if self.variables is not None and len(self.variables) != self.n:
            raise ValueError(f"expected {self.n} variable names, got {len(self.variables)}")
        if self.ell > self.n:
            raise ValueError("Distinguished index ell must lie in [1, n]")
        if self.box is not None and len(self.box.lo) != self.n:
            raise ValueError(f"box must have {self.n} intervals")
        if self.deformation is not None and len(self.deformation.H) != self.n:
            raise ValueError(f"deformation needs {self.n} entries")
        if self.target is not None and len(self.target) != self.n:
            raise ValueError(f"target needs {self.n} polynomials")
        for g in self.generators or []:
            if len(g) != self.n or any(s not in (-1, 1) for s in g):
                raise ValueError("generators are sign patterns of length n with entries +-1")
        return self
