"""Multifield energy densities e(x, u, F, nu, N) and hypothesis checks.

A density evaluates pointwise on the state list

    x   material point (3,)
    u   deformation value (3,)
    F   deformation gradient (3, 3)
    nu  descriptor, ambient embedding (embed_dim,)
    N   descriptor gradient (embed_dim, 3)

and exposes analytic partial derivatives with the same leading batch axes.
Derivatives are taken in the ambient embedding; tangent projection is the
balance module's job.  Densities flagged external depend on (x, u, nu) only
and model applied loads; their descriptor derivative feeds the external
action -beta instead of the internal self-action z.

Shipped constitutive families:

* quadratic linear-elastic coupling densities for tensor- and vector-valued
  descriptors, evaluated on the infinitesimal strain surrogate
  sym(F) - I, with the centrosymmetric reductions (tensor case drops the
  strain-gradient couplings A2, A4; vector case drops A1, A4);
* generalized Ginzburg-Landau: substructural potential plus (1/2) k |N|^2;
* pure descriptor Dirichlet density (1/2)|N|^2;
* compressible macroscopic stored energies with a convex volumetric barrier
  t - log t - 1, plus a minors-power form c |M(F)|^r + theta(det F);
* quasicrystal density: macro part + (1/2) K |Dnu|^2 phason stiffness with
  optional strain/phason-gradient coupling;
* smectic-A layer energy (1/2) k1 (|grad l| - 1)^2 + (1/2) k2 (div n)^2;
* dead loads, external field couplings, and a deliberately frame-breaking
  easy-axis fixture for rotational-balance tests.

Coercivity hypotheses are data (GrowthSpec): a lower bound

    e >= C1 (|M(F)|^r + |N|^s) + theta(det F)          (minors variant)
    e >= C1 (|F|^2 + |cof F|^(3/2) + |N|^s) + theta(det F)   (H3 variant)

with optional terms switched off for energies controlling only one field.
The H3 variant keeps the 3/2 cofactor exponent; a quadratic-exponent
restatement exists in the literature for the same hypothesis and is noted
here but not implemented.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    GeneratorUnavailableError,
    ShapeMismatchError,
    SizeMismatchError,
    WrongManifoldError,
)
from .fields import FieldState, gradients, integrate_cells
from .minors import cofactor, det3, minors_norm_squared

LEVI3 = np.zeros((3, 3, 3))
LEVI3[0, 1, 2] = LEVI3[1, 2, 0] = LEVI3[2, 0, 1] = 1.0
LEVI3[0, 2, 1] = LEVI3[2, 1, 0] = LEVI3[1, 0, 2] = -1.0


def log_barrier(t: np.ndarray) -> np.ndarray:
    """Convex volumetric barrier t - log t - 1, +inf for t <= 0."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, np.inf)
    ok = t > 0
    out[ok] = t[ok] - np.log(t[ok]) - 1.0
    return out if out.ndim else float(out)


def log_barrier_prime(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    ok = t > 0
    out[ok] = 1.0 - 1.0 / t[ok]
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GrowthSpec:
    """Documented coercivity bound for a density.

    variant H2 uses the full minors magnitude |M(F)|^r; H3 uses
    |F|^2 + |cof F|^(3/2).  include flags zero out terms for densities that
    control only the deformation or only the descriptor gradient.
    """

    c1: float
    r: float = 4.0 / 3.0
    s: float = 2.0
    theta: Callable[[np.ndarray], np.ndarray] | None = None
    variant: str = "H2"
    include_minor_term: bool = True
    include_gradient_term: bool = True
    description: str = ""

    def __post_init__(self):
        if self.c1 <= 0:
            raise ShapeMismatchError("growth constant C1 must be positive")
        if self.include_minor_term and self.variant == "H2" and not self.r > 1:
            raise ShapeMismatchError("minors exponent r must exceed 1")
        if self.include_gradient_term and not self.s > 1:
            raise ShapeMismatchError("gradient exponent s must exceed 1")
        if self.variant not in ("H2", "H3"):
            raise ShapeMismatchError(f"unknown growth variant {self.variant!r}")

    def bound(self, F: np.ndarray, N: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        N = np.asarray(N, dtype=float)
        out = np.zeros(F.shape[:-2])
        if self.include_minor_term:
            if self.variant == "H2":
                out = out + self.c1 * minors_norm_squared(F) ** (self.r / 2.0)
            else:
                cof = cofactor(F)
                out = out + self.c1 * (
                    np.einsum("...ij,...ij->...", F, F)
                    + np.einsum("...ij,...ij->...", cof, cof) ** 0.75
                )
        if self.include_gradient_term:
            out = out + self.c1 * np.einsum("...ai,...ai->...", N, N) ** (self.s / 2.0)
        if self.theta is not None:
            out = out + self.theta(det3(F))
        return out


class EnergyDensity:
    """Base density: zero energy, zero derivatives, no growth claim."""

    name = "zero"
    embed_dim = 1
    external = False
    growth_meta: GrowthSpec | None = None

    def eval(self, x, u, F, nu, N):
        return np.zeros(np.asarray(F).shape[:-2])

    def d_u(self, x, u, F, nu, N):
        return np.zeros(np.asarray(u).shape)

    def d_F(self, x, u, F, nu, N):
        return np.zeros(np.asarray(F).shape)

    def d_nu(self, x, u, F, nu, N):
        return np.zeros(np.asarray(nu).shape)

    def d_N(self, x, u, F, nu, N):
        return np.zeros(np.asarray(N).shape)

    def d_x(self, x, u, F, nu, N):
        return np.zeros(np.asarray(x).shape)

    def minors_form(self):
        """Generating function g(m1, m2, m3, N; x, u, nu) for convexity in
        minors space, or None when the density registers none."""
        return None

    @property
    def parts(self) -> list["EnergyDensity"]:
        return [self]


class SumDensity(EnergyDensity):
    """Additive decomposition; evaluates to the exact sum of its parts."""

    def __init__(self, parts: list[EnergyDensity], name: str = "sum"):
        if not parts:
            raise SizeMismatchError("sum of no densities")
        dims = {p.embed_dim for p in parts}
        if len(dims) != 1:
            raise SizeMismatchError(f"parts disagree on descriptor dimension: {dims}")
        self._parts = list(parts)
        self.embed_dim = parts[0].embed_dim
        self.name = name
        self.external = all(p.external for p in parts)
        self.growth_meta = None

    @property
    def parts(self):
        return list(self._parts)

    def eval(self, x, u, F, nu, N):
        out = self._parts[0].eval(x, u, F, nu, N)
        for p in self._parts[1:]:
            out = out + p.eval(x, u, F, nu, N)
        return out

    def _sum(self, attr, x, u, F, nu, N):
        out = getattr(self._parts[0], attr)(x, u, F, nu, N)
        for p in self._parts[1:]:
            out = out + getattr(p, attr)(x, u, F, nu, N)
        return out

    def d_u(self, x, u, F, nu, N):
        return self._sum("d_u", x, u, F, nu, N)

    def d_F(self, x, u, F, nu, N):
        return self._sum("d_F", x, u, F, nu, N)

    def d_nu(self, x, u, F, nu, N):
        return self._sum("d_nu", x, u, F, nu, N)

    def d_N(self, x, u, F, nu, N):
        return self._sum("d_N", x, u, F, nu, N)

    def d_x(self, x, u, F, nu, N):
        return self._sum("d_x", x, u, F, nu, N)

    def minors_form(self):
        forms = [p.minors_form() for p in self._parts]
        if any(f is None for f in forms):
            return None

        def g(m1, m2, m3, N, *, x, u, nu):
            out = forms[0](m1, m2, m3, N, x=x, u=u, nu=nu)
            for f in forms[1:]:
                out = out + f(m1, m2, m3, N, x=x, u=u, nu=nu)
            return out

        return g


# ---------------------------------------------------------------------------
# descriptor-gradient densities
# ---------------------------------------------------------------------------

class DirichletDescriptor(EnergyDensity):
    """e = (1/2) |N|^2; the harmonic-map integrand for any embedding."""

    def __init__(self, embed_dim: int = 3, name: str = "dirichlet"):
        self.embed_dim = embed_dim
        self.name = name
        self.growth_meta = GrowthSpec(
            c1=0.5,
            s=2.0,
            include_minor_term=False,
            theta=None,
            description="pure descriptor-gradient control, minors and barrier absent",
        )

    def eval(self, x, u, F, nu, N):
        return 0.5 * np.einsum("...ai,...ai->...", N, N)

    def d_N(self, x, u, F, nu, N):
        return np.asarray(N, dtype=float).copy()

    def minors_form(self):
        def g(m1, m2, m3, N, *, x, u, nu):
            return 0.5 * np.einsum("...ai,...ai->...", N, N)

        return g


def make_dirichlet_sphere() -> DirichletDescriptor:
    """Director Dirichlet energy on S^2 (nematic one-constant form)."""
    return DirichletDescriptor(embed_dim=3, name="dirichlet-sphere")


class GinzburgLandau(EnergyDensity):
    """e = W(x, nu) + (1/2) k |N|^2 with a pluggable substructural potential.

    well must provide eval(x, nu), d_nu(x, nu), d_x(x, nu); None means W = 0.
    """

    def __init__(self, well, stiffness: float, embed_dim: int, name: str = "ginzburg-landau",
                 well_nonnegative: bool = False):
        if stiffness <= 0:
            raise ShapeMismatchError("descriptor stiffness must be positive")
        self.well = well
        self.stiffness = float(stiffness)
        self.embed_dim = embed_dim
        self.name = name
        if well is None or well_nonnegative:
            self.growth_meta = GrowthSpec(
                c1=self.stiffness / 2.0,
                s=2.0,
                include_minor_term=False,
                theta=None,
                description="descriptor-gradient control from the stiffness term",
            )
        else:
            self.growth_meta = None

    def eval(self, x, u, F, nu, N):
        out = 0.5 * self.stiffness * np.einsum("...ai,...ai->...", N, N)
        if self.well is not None:
            out = out + self.well.eval(x, nu)
        return out

    def d_nu(self, x, u, F, nu, N):
        if self.well is None:
            return np.zeros(np.asarray(nu).shape)
        return self.well.d_nu(x, nu)

    def d_N(self, x, u, F, nu, N):
        return self.stiffness * np.asarray(N, dtype=float)

    def d_x(self, x, u, F, nu, N):
        if self.well is None:
            return np.zeros(np.asarray(x).shape)
        return self.well.d_x(x, nu)


def make_ginzburg_landau(well, stiffness: float, embed_dim: int, **kw) -> GinzburgLandau:
    return GinzburgLandau(well, stiffness, embed_dim, **kw)


@dataclass
class ComponentDoubleWell:
    """w0 (nu_i - a)^2 (nu_i - b)^2 acting on one embedding component."""

    w0: float
    a: float
    b: float
    component: int = 0

    def eval(self, x, nu):
        s = np.asarray(nu)[..., self.component]
        return self.w0 * (s - self.a) ** 2 * (s - self.b) ** 2

    def d_nu(self, x, nu):
        nu = np.asarray(nu, dtype=float)
        s = nu[..., self.component]
        out = np.zeros(nu.shape)
        out[..., self.component] = (
            2.0 * self.w0 * (s - self.a) * (s - self.b) * ((s - self.a) + (s - self.b))
        )
        return out

    def d_x(self, x, nu):
        return np.zeros(np.asarray(x).shape)


@dataclass
class ModulatedWell:
    """Space-modulated potential g(x) * base(nu); supplies a nonzero d_x."""

    base: object
    g: Callable[[np.ndarray], np.ndarray]
    dg: Callable[[np.ndarray], np.ndarray]

    def eval(self, x, nu):
        return self.g(x) * self.base.eval(x, nu)

    def d_nu(self, x, nu):
        return self.g(x)[..., None] * self.base.d_nu(x, nu)

    def d_x(self, x, nu):
        return self.dg(x) * self.base.eval(x, nu)[..., None]


# ---------------------------------------------------------------------------
# quadratic linear-elastic coupling densities
# ---------------------------------------------------------------------------

def isotropic_elasticity(lam: float, mu: float) -> np.ndarray:
    """C_{ijhk} = lam d_ij d_hk + mu (d_ih d_jk + d_ik d_jh)."""
    d = np.eye(3)
    return (
        lam * np.einsum("ij,hk->ijhk", d, d)
        + mu * (np.einsum("ih,jk->ijhk", d, d) + np.einsum("ik,jh->ijhk", d, d))
    )


def _sym_major4(C):
    return 0.5 * (C + C.transpose(2, 3, 0, 1))


def _strain(F):
    F = np.asarray(F, dtype=float)
    return 0.5 * (F + np.swapaxes(F, -1, -2)) - np.eye(3)


class QuadraticTensor(EnergyDensity):
    """Quadratic density for a symmetric second-rank tensor descriptor.

    e = (1/2) eps:C:eps + eps:A1:nu + eps:A2:N + (1/2) nu:A3:nu
        + nu:A4:N + (1/2) N:A5:N,   eps = sym(F) - I.

    Descriptor embedding is row-major R^9; N reshapes to (3, 3, 3) with the
    last index spatial.  centrosymmetric drops the odd couplings A2 and A4.
    """

    embed_dim = 9

    def __init__(self, C, A1=None, A2=None, A3=None, A4=None, A5=None,
                 centrosymmetric: bool = False, name: str = "quadratic-tensor"):
        self.name = name
        self.centrosymmetric = centrosymmetric
        self.C = _sym_major4(self._shaped(C, (3, 3, 3, 3), "C"))
        self.A1 = self._shaped(A1, (3, 3, 3, 3), "A1", optional=True)
        self.A3 = _sym_major4(self._shaped(A3, (3, 3, 3, 3), "A3", optional=True, default=0.0))
        self.A5 = self._shaped(A5, (3, 3, 3, 3, 3, 3), "A5", optional=True)
        if self.A5 is not None:
            self.A5 = 0.5 * (self.A5 + self.A5.transpose(3, 4, 5, 0, 1, 2))
        if centrosymmetric:
            if A2 is not None or A4 is not None:
                raise ShapeMismatchError("centrosymmetric tensor density admits no A2/A4")
            self.A2 = None
            self.A4 = None
        else:
            self.A2 = self._shaped(A2, (3, 3, 3, 3, 3), "A2", optional=True)
            self.A4 = self._shaped(A4, (3, 3, 3, 3, 3), "A4", optional=True)

    @staticmethod
    def _shaped(T, shape, label, optional=False, default=None):
        if T is None:
            if optional:
                return None if default is None else np.zeros(shape)
            raise ShapeMismatchError(f"{label} is required")
        T = np.asarray(T, dtype=float)
        if T.shape != shape:
            raise ShapeMismatchError(f"{label} must have shape {shape}, got {T.shape}")
        return T

    @staticmethod
    def _mats(nu, N):
        nu = np.asarray(nu, dtype=float)
        N = np.asarray(N, dtype=float)
        return nu.reshape(nu.shape[:-1] + (3, 3)), N.reshape(N.shape[:-2] + (3, 3, 3))

    def eval(self, x, u, F, nu, N):
        eps = _strain(F)
        nm, Nm = self._mats(nu, N)
        out = 0.5 * np.einsum("ijhk,...ij,...hk->...", self.C, eps, eps)
        out = out + 0.5 * np.einsum("abcd,...ab,...cd->...", self.A3, nm, nm)
        if self.A1 is not None:
            out = out + np.einsum("ijab,...ij,...ab->...", self.A1, eps, nm)
        if self.A2 is not None:
            out = out + np.einsum("ijabk,...ij,...abk->...", self.A2, eps, Nm)
        if self.A4 is not None:
            out = out + np.einsum("abcdk,...ab,...cdk->...", self.A4, nm, Nm)
        if self.A5 is not None:
            out = out + 0.5 * np.einsum("abicdj,...abi,...cdj->...", self.A5, Nm, Nm)
        return out

    def _d_eps(self, eps, nm, Nm):
        out = np.einsum("ijhk,...hk->...ij", self.C, eps)
        if self.A1 is not None:
            out = out + np.einsum("ijab,...ab->...ij", self.A1, nm)
        if self.A2 is not None:
            out = out + np.einsum("ijabk,...abk->...ij", self.A2, Nm)
        return out

    def d_F(self, x, u, F, nu, N):
        eps = _strain(F)
        nm, Nm = self._mats(nu, N)
        d = self._d_eps(eps, nm, Nm)
        return 0.5 * (d + np.swapaxes(d, -1, -2))

    def d_nu(self, x, u, F, nu, N):
        eps = _strain(F)
        nm, Nm = self._mats(nu, N)
        out = np.einsum("abcd,...cd->...ab", self.A3, nm)
        if self.A1 is not None:
            out = out + np.einsum("ijab,...ij->...ab", self.A1, eps)
        if self.A4 is not None:
            out = out + np.einsum("abcdk,...cdk->...ab", self.A4, Nm)
        return out.reshape(np.asarray(nu).shape)

    def d_N(self, x, u, F, nu, N):
        eps = _strain(F)
        nm, Nm = self._mats(nu, N)
        out = np.zeros(Nm.shape)
        if self.A2 is not None:
            out = out + np.einsum("ijabk,...ij->...abk", self.A2, eps)
        if self.A4 is not None:
            out = out + np.einsum("abcdk,...ab->...cdk", self.A4, nm)
        if self.A5 is not None:
            out = out + np.einsum("abicdj,...abi->...cdj", self.A5, Nm)
        return out.reshape(np.asarray(N).shape)

    def minors_form(self):
        def g(m1, m2, m3, N, *, x, u, nu):
            return self.eval(x, u, m1, nu, N)

        return g


class QuadraticVector(EnergyDensity):
    """Quadratic density for a vector descriptor (microcracks, polarization).

    e = (1/2) eps:C:eps + eps:A1.nu + eps:A2:N + (1/2) nu.A3.nu
        + nu.A4:N + (1/2) N:A5:N.

    centrosymmetric drops the odd couplings A1 and A4 (a polar vector cannot
    couple linearly to strain in a centrosymmetric body).
    """

    embed_dim = 3

    def __init__(self, C, A1=None, A2=None, A3=None, A4=None, A5=None,
                 centrosymmetric: bool = False, name: str = "quadratic-vector"):
        self.name = name
        self.centrosymmetric = centrosymmetric
        self.C = _sym_major4(QuadraticTensor._shaped(C, (3, 3, 3, 3), "C"))
        self.A3 = QuadraticTensor._shaped(A3, (3, 3), "A3", optional=True, default=0.0)
        self.A3 = 0.5 * (self.A3 + self.A3.T)
        self.A5 = QuadraticTensor._shaped(A5, (3, 3, 3, 3), "A5", optional=True)
        if self.A5 is not None:
            self.A5 = 0.5 * (self.A5 + self.A5.transpose(2, 3, 0, 1))
        self.A2 = QuadraticTensor._shaped(A2, (3, 3, 3, 3), "A2", optional=True)
        if centrosymmetric:
            if A1 is not None or A4 is not None:
                raise ShapeMismatchError("centrosymmetric vector density admits no A1/A4")
            self.A1 = None
            self.A4 = None
        else:
            self.A1 = QuadraticTensor._shaped(A1, (3, 3, 3), "A1", optional=True)
            self.A4 = QuadraticTensor._shaped(A4, (3, 3, 3), "A4", optional=True)

    def eval(self, x, u, F, nu, N):
        eps = _strain(F)
        nu = np.asarray(nu, dtype=float)
        N = np.asarray(N, dtype=float)
        out = 0.5 * np.einsum("ijhk,...ij,...hk->...", self.C, eps, eps)
        out = out + 0.5 * np.einsum("ac,...a,...c->...", self.A3, nu, nu)
        if self.A1 is not None:
            out = out + np.einsum("ija,...ij,...a->...", self.A1, eps, nu)
        if self.A2 is not None:
            out = out + np.einsum("ijak,...ij,...ak->...", self.A2, eps, N)
        if self.A4 is not None:
            out = out + np.einsum("agk,...a,...gk->...", self.A4, nu, N)
        if self.A5 is not None:
            out = out + 0.5 * np.einsum("aicj,...ai,...cj->...", self.A5, N, N)
        return out

    def d_F(self, x, u, F, nu, N):
        eps = _strain(F)
        nu = np.asarray(nu, dtype=float)
        N = np.asarray(N, dtype=float)
        d = np.einsum("ijhk,...hk->...ij", self.C, eps)
        if self.A1 is not None:
            d = d + np.einsum("ija,...a->...ij", self.A1, nu)
        if self.A2 is not None:
            d = d + np.einsum("ijak,...ak->...ij", self.A2, N)
        return 0.5 * (d + np.swapaxes(d, -1, -2))

    def d_nu(self, x, u, F, nu, N):
        eps = _strain(F)
        nu = np.asarray(nu, dtype=float)
        N = np.asarray(N, dtype=float)
        out = np.einsum("ac,...c->...a", self.A3, nu)
        if self.A1 is not None:
            out = out + np.einsum("ija,...ij->...a", self.A1, eps)
        if self.A4 is not None:
            out = out + np.einsum("agk,...gk->...a", self.A4, N)
        return out

    def d_N(self, x, u, F, nu, N):
        eps = _strain(F)
        nu = np.asarray(nu, dtype=float)
        N = np.asarray(N, dtype=float)
        out = np.zeros(N.shape)
        if self.A2 is not None:
            out = out + np.einsum("ijak,...ij->...ak", self.A2, eps)
        if self.A4 is not None:
            out = out + np.einsum("agk,...a->...gk", self.A4, nu)
        if self.A5 is not None:
            out = out + np.einsum("aicj,...ai->...cj", self.A5, N)
        return out

    def minors_form(self):
        def g(m1, m2, m3, N, *, x, u, nu):
            return self.eval(x, u, m1, nu, N)

        return g


def make_quadratic_tensor(C, **kw) -> QuadraticTensor:
    return QuadraticTensor(C, **kw)


def make_quadratic_vector(C, **kw) -> QuadraticVector:
    return QuadraticVector(C, **kw)


# ---------------------------------------------------------------------------
# finite-strain macroscopic energies and the quasicrystal density
# ---------------------------------------------------------------------------

class CompressibleMacro(EnergyDensity):
    """e(F) = a |F|^2 + b |cof F|^2 + c (det F - log det F - 1), det F > 0.

    normalize_reference subtracts the reference value 3a + 3b so the
    stress-free state scores zero; that variant carries no growth claim
    (a zero-at-identity energy cannot dominate a strictly positive bound).
    """

    embed_dim = 1

    def __init__(self, a: float = 1.0, b: float = 1.0, c: float = 1.0,
                 normalize_reference: bool = False, name: str = "compressible-macro",
                 embed_dim: int = 1):
        if min(a, b, c) <= 0:
            raise ShapeMismatchError("macro coefficients must be positive")
        self.embed_dim = embed_dim  # descriptor is ignored; set for summation
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.offset = 3.0 * (self.a + self.b) if normalize_reference else 0.0
        self.normalized = normalize_reference
        self.name = name
        self.growth_meta = None if normalize_reference else self._derive_growth()

    def _derive_growth(self) -> GrowthSpec:
        # C1 = min(3a/4, b/2, 3/5 psi*), psi* = inf_t psi(t) over det values,
        # psi(t) = (3a/2) t^(2/3) + (3b/2) t^(4/3) + (c/2)(t - log t - 1).
        t = np.exp(np.linspace(np.log(1e-9), np.log(1e9), 20001))
        psi = 1.5 * self.a * t ** (2.0 / 3.0) + 1.5 * self.b * t ** (4.0 / 3.0) + 0.5 * self.c * (
            t - np.log(t) - 1.0
        )
        psi_star = float(psi.min())
        c1 = min(0.75 * self.a, 0.5 * self.b, 0.6 * psi_star)
        cc = self.c

        def theta(tt):
            return 0.5 * cc * log_barrier(tt)

        return GrowthSpec(
            c1=c1,
            r=4.0 / 3.0,
            s=2.0,
            theta=theta,
            include_gradient_term=False,
            description=(
                f"C1 = min(3a/4, b/2, 3 psi*/5) with psi* = {psi_star:.6g}; "
                "theta = (c/2)(t - log t - 1)"
            ),
        )

    def macro_eval(self, F):
        F = np.asarray(F, dtype=float)
        cof = cofactor(F)
        det = det3(F)
        quad = self.a * np.einsum("...ij,...ij->...", F, F) + self.b * np.einsum(
            "...ij,...ij->...", cof, cof
        )
        return quad + self.c * log_barrier(det) - self.offset

    def macro_d_F(self, F):
        F = np.asarray(F, dtype=float)
        cof = cofactor(F)
        det = det3(F)
        dcof = 2.0 * self.b * np.einsum("pib,qjd,...bd,...pq->...ij", LEVI3, LEVI3, F, cof)
        return 2.0 * self.a * F + dcof + (self.c * log_barrier_prime(det))[..., None, None] * cof

    def eval(self, x, u, F, nu, N):
        return self.macro_eval(F)

    def d_F(self, x, u, F, nu, N):
        return self.macro_d_F(F)

    def minors_form(self):
        def g(m1, m2, m3, N, *, x, u, nu):
            quad = self.a * np.einsum("...ij,...ij->...", m1, m1) + self.b * np.einsum(
                "...ij,...ij->...", m2, m2
            )
            return quad + self.c * log_barrier(m3) - self.offset

        return g


class MinorsPower(EnergyDensity):
    """e(F) = c |M(F)|^r + theta(det F); the bound itself as a density."""

    embed_dim = 1

    def __init__(self, c: float = 1.0, r: float = 2.0,
                 theta: Callable | None = log_barrier,
                 theta_prime: Callable | None = log_barrier_prime,
                 name: str = "minors-power"):
        if c <= 0 or r <= 1:
            raise ShapeMismatchError("need c > 0 and r > 1")
        self.c, self.r = float(c), float(r)
        self.theta = theta
        self.theta_prime = theta_prime
        self.name = name
        self.growth_meta = GrowthSpec(
            c1=self.c, r=self.r, theta=theta, include_gradient_term=False,
            description="exact: the density equals its own bound",
        )

    def eval(self, x, u, F, nu, N):
        out = self.c * minors_norm_squared(F) ** (self.r / 2.0)
        if self.theta is not None:
            out = out + self.theta(det3(F))
        return out

    def d_F(self, x, u, F, nu, N):
        F = np.asarray(F, dtype=float)
        cof = cofactor(F)
        det = det3(F)
        m2 = minors_norm_squared(F)
        # d|M|^r/dF = r |M|^(r-2) (F + sum over cofactor and det slots)
        dcof = np.einsum("pib,qjd,...bd,...pq->...ij", LEVI3, LEVI3, F, cof)
        core = (self.r * m2 ** (self.r / 2.0 - 1.0))[..., None, None] * (
            F + dcof + det[..., None, None] * cof
        )
        out = self.c * core
        if self.theta_prime is not None:
            out = out + self.theta_prime(det)[..., None, None] * cof
        return out

    def minors_form(self):
        def g(m1, m2, m3, N, *, x, u, nu):
            mag = (
                1.0
                + np.einsum("...ij,...ij->...", m1, m1)
                + np.einsum("...ij,...ij->...", m2, m2)
                + m3**2
            )
            out = self.c * mag ** (self.r / 2.0)
            if self.theta is not None:
                out = out + self.theta(m3)
            return out

        return g


class Quasicrystal(EnergyDensity):
    """Macro stored energy plus phason-gradient stiffness and coupling.

    e = macro(F) + (1/2) K |N|^2 + B : (F, N) with a phason descriptor in
    R^3.  The growth bound merges the macro bound with the stiffness term
    when no coupling is present (C1 also capped by K/2 so the |N|^2 slot is
    honestly covered).
    """

    embed_dim = 3

    def __init__(self, macro: CompressibleMacro | None = None,
                 phason_stiffness: float = 1.0,
                 coupling: np.ndarray | None = None,
                 name: str = "quasicrystal"):
        if phason_stiffness <= 0:
            raise ShapeMismatchError("phason stiffness must be positive")
        self.macro = macro if macro is not None else CompressibleMacro()
        self.K = float(phason_stiffness)
        self.coupling = None
        if coupling is not None:
            coupling = np.asarray(coupling, dtype=float)
            if coupling.shape != (3, 3, 3, 3):
                raise ShapeMismatchError("coupling must be (3, 3, 3, 3): strain x phason-gradient")
            self.coupling = coupling
        self.name = name
        base = self.macro.growth_meta
        if base is not None and self.coupling is None:
            self.growth_meta = GrowthSpec(
                c1=min(base.c1, self.K / 2.0),
                r=base.r,
                s=2.0,
                theta=base.theta,
                include_gradient_term=True,
                description=base.description + f"; capped by K/2 = {self.K / 2:.6g}",
            )
        else:
            self.growth_meta = None

    def eval(self, x, u, F, nu, N):
        out = self.macro.macro_eval(F) + 0.5 * self.K * np.einsum("...ai,...ai->...", N, N)
        if self.coupling is not None:
            out = out + np.einsum("ijak,...ij,...ak->...", self.coupling, F, N)
        return out

    def d_F(self, x, u, F, nu, N):
        out = self.macro.macro_d_F(F)
        if self.coupling is not None:
            out = out + np.einsum("ijak,...ak->...ij", self.coupling, np.asarray(N, dtype=float))
        return out

    def d_N(self, x, u, F, nu, N):
        out = self.K * np.asarray(N, dtype=float)
        if self.coupling is not None:
            out = out + np.einsum("ijak,...ij->...ak", self.coupling, np.asarray(F, dtype=float))
        return out

    def minors_form(self):
        base = self.macro.minors_form()
        if self.coupling is not None:
            return None  # bilinear coupling spoils joint convexity claims

        def g(m1, m2, m3, N, *, x, u, nu):
            return base(m1, m2, m3, N, x=x, u=u, nu=nu) + 0.5 * self.K * np.einsum(
                "...ai,...ai->...", N, N
            )

        return g


def make_quasicrystal(macro: CompressibleMacro | None = None,
                      phason_stiffness: float = 1.0,
                      coupling: np.ndarray | None = None,
                      normalize_reference: bool = False) -> Quasicrystal:
    if macro is None:
        macro = CompressibleMacro(normalize_reference=normalize_reference)
    return Quasicrystal(macro=macro, phason_stiffness=phason_stiffness, coupling=coupling)


# ---------------------------------------------------------------------------
# smectic-A, loads, fixtures
# ---------------------------------------------------------------------------

class SmecticA(EnergyDensity):
    """Layer energy (1/2) k1 (|grad l| - 1)^2 + (1/2) k2 (div n)^2.

    Descriptor (l, n): layer phase scalar and unit director, embed R^4.
    Not objective: div n contracts the director's ambient index with a
    material one, as usual for this small-deformation layer model.
    """

    embed_dim = 4

    def __init__(self, k1: float = 1.0, k2: float = 1.0, name: str = "smectic-a"):
        if min(k1, k2) <= 0:
            raise ShapeMismatchError("smectic constants must be positive")
        self.k1, self.k2 = float(k1), float(k2)
        self.name = name

    @staticmethod
    def _split(N):
        N = np.asarray(N, dtype=float)
        return N[..., 0, :], N[..., 1:4, :]

    def eval(self, x, u, F, nu, N):
        g, Dn = self._split(N)
        gn = np.linalg.norm(g, axis=-1)
        divn = np.einsum("...ii->...", Dn)
        return 0.5 * self.k1 * (gn - 1.0) ** 2 + 0.5 * self.k2 * divn**2

    def d_N(self, x, u, F, nu, N):
        g, Dn = self._split(N)
        gn = np.linalg.norm(g, axis=-1)
        out = np.zeros(np.asarray(N).shape)
        safe = np.maximum(gn, 1e-14)
        out[..., 0, :] = (self.k1 * (gn - 1.0) / safe)[..., None] * g
        divn = np.einsum("...ii->...", Dn)
        out[..., 1:4, :] += (self.k2 * divn)[..., None, None] * np.eye(3)
        return out


def make_smectic_a(k1: float = 1.0, k2: float = 1.0) -> SmecticA:
    return SmecticA(k1, k2)


class DeadLoad(EnergyDensity):
    """External potential -force . u (gravity-type dead load)."""

    external = True

    def __init__(self, force, embed_dim: int = 3, name: str = "dead-load"):
        self.force = np.asarray(force, dtype=float)
        if self.force.shape != (3,):
            raise ShapeMismatchError("dead load force must be a 3-vector")
        self.embed_dim = embed_dim
        self.name = name

    def eval(self, x, u, F, nu, N):
        return -np.einsum("i,...i->...", self.force, np.asarray(u, dtype=float))

    def d_u(self, x, u, F, nu, N):
        return -np.broadcast_to(self.force, np.asarray(u).shape).copy()


class ExternalFieldCoupling(EnergyDensity):
    """External potential -h . nu (applied field conjugate to the descriptor)."""

    external = True

    def __init__(self, h, name: str = "external-field"):
        self.h = np.asarray(h, dtype=float)
        if self.h.ndim != 1:
            raise ShapeMismatchError("field must be a flat embedding vector")
        self.embed_dim = self.h.shape[0]
        self.name = name

    def eval(self, x, u, F, nu, N):
        return -np.einsum("a,...a->...", self.h, np.asarray(nu, dtype=float))

    def d_nu(self, x, u, F, nu, N):
        return -np.broadcast_to(self.h, np.asarray(nu).shape).copy()


class EasyAxisAnchoring(EnergyDensity):
    """Internal easy-axis term w (axis . nu)^2: deliberately frame-breaking.

    A fixed lab axis inside an internal density violates objectivity, which
    is exactly what the rotational-balance checks need a positive control
    for.
    """

    def __init__(self, axis, weight: float = 1.0, embed_dim: int = 3,
                 name: str = "easy-axis"):
        self.axis = np.asarray(axis, dtype=float)
        if self.axis.shape != (embed_dim,):
            raise ShapeMismatchError("axis must match the descriptor embedding")
        self.weight = float(weight)
        self.embed_dim = embed_dim
        self.name = name

    def eval(self, x, u, F, nu, N):
        p = np.einsum("a,...a->...", self.axis, np.asarray(nu, dtype=float))
        return self.weight * p**2

    def d_nu(self, x, u, F, nu, N):
        p = np.einsum("a,...a->...", self.axis, np.asarray(nu, dtype=float))
        return (2.0 * self.weight * p)[..., None] * self.axis


# ---------------------------------------------------------------------------
# line defects and the relaxed spin energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LineDefect:
    """Integer-multiplicity polyline defect: vertices (k+1, 3), multiplicities (k,)."""

    points: np.ndarray
    multiplicities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "multiplicities", np.asarray(self.multiplicities))
        if self.points.ndim != 2 or self.points.shape[1] != 3 or self.points.shape[0] < 2:
            raise ShapeMismatchError("polyline needs at least two 3d points")
        if self.multiplicities.shape != (self.points.shape[0] - 1,):
            raise SizeMismatchError("one multiplicity per segment required")
        if not np.issubdtype(self.multiplicities.dtype, np.integer):
            raise ShapeMismatchError("multiplicities must be integers")
        if np.any(self.multiplicities < 1):
            raise ShapeMismatchError("multiplicities must be >= 1")
        if np.any(self.segment_lengths() <= 0):
            raise ShapeMismatchError("degenerate zero-length segment")

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=-1)

    def tangents(self) -> np.ndarray:
        d = np.diff(self.points, axis=0)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.points[:-1] + self.points[1:])

    def mass(self) -> float:
        """Multiplicity-weighted total length."""
        return float(np.sum(self.multiplicities * self.segment_lengths()))


def line_defect_mass(defect: LineDefect) -> float:
    return defect.mass()


@dataclass(frozen=True)
class SpinEnergyBreakdown:
    dirichlet: float
    defect_term: float
    macro: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.defect_term + self.macro


def relaxed_spin_energy(state: FieldState, defect: LineDefect | None = None,
                        macro_energy: float = 0.0) -> SpinEnergyBreakdown:
    """Relaxed director energy: (1/2) int |Dnu|^2 + 4 pi mass(L) + macro part.

    The exact sum of the three parts is the contract; the descriptor must be
    a 3-component director field.
    """
    if state.embed_dim != 3:
        raise WrongManifoldError("relaxed spin energy needs a 3-component director")
    gf = gradients(state)
    dens = 0.5 * np.einsum("...ai,...ai->...", gf.N, gf.N)
    dirichlet = integrate_cells(dens, state.grid, state.active)
    defect_term = 4.0 * np.pi * defect.mass() if defect is not None else 0.0
    return SpinEnergyBreakdown(dirichlet=dirichlet, defect_term=defect_term,
                               macro=float(macro_energy))


# ---------------------------------------------------------------------------
# total energy, state sampling, hypothesis checks
# ---------------------------------------------------------------------------

def total_energy(density: EnergyDensity, state: FieldState) -> float:
    """Midpoint-quadrature energy over the active cells; +inf if any active
    cell evaluates non-finite (volumetric barrier violated)."""
    gf = gradients(state)
    vals = density.eval(gf.x, gf.u_bar, gf.F, gf.nu_bar, gf.N)
    sel = vals[state.active]
    if not np.all(np.isfinite(sel)):
        return np.inf
    return float(sel.sum() * state.grid.cell_volume)


@dataclass
class StateBatch:
    """Batched pointwise states for samplers and checks."""

    x: np.ndarray
    u: np.ndarray
    F: np.ndarray
    nu: np.ndarray
    N: np.ndarray

    @property
    def n(self) -> int:
        return self.F.shape[0]


def sample_states(rng: np.random.Generator, n: int, embed_dim: int,
                  spread: float = 0.4, wide: bool = False) -> StateBatch:
    """Random admissible pointwise states: det F > 0 by construction.

    F = R1 diag(lambda) R2 with rotations and lognormal singular values;
    wide stretches the magnitude range for growth probing.
    """
    sigma = 1.2 if wide else spread
    from .manifolds import rotation_from_vector

    lam = rng.lognormal(0.0, sigma, size=(n, 3))
    F = np.empty((n, 3, 3))
    for i in range(n):
        R1 = rotation_from_vector(rng.normal(size=3))
        R2 = rotation_from_vector(rng.normal(size=3))
        F[i] = R1 @ np.diag(lam[i]) @ R2
    scale = rng.lognormal(0.0, sigma, size=(n, 1, 1))
    N = rng.normal(size=(n, embed_dim, 3)) * scale
    return StateBatch(
        x=rng.normal(size=(n, 3)),
        u=rng.normal(size=(n, 3)),
        F=F,
        nu=rng.normal(size=(n, embed_dim)),
        N=N,
    )


@dataclass
class GrowthReport:
    samples: int
    violations: int
    min_slack: float
    worst: dict | None

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_growth(density: EnergyDensity, spec: GrowthSpec | None = None,
                 sampler=None, n: int = 10_000, seed: int = 0) -> GrowthReport:
    """Sample states and verify e >= bound; slack = e - bound per sample."""
    if spec is None:
        spec = density.growth_meta
    if spec is None:
        raise GeneratorUnavailableError(f"{density.name} documents no growth bound")
    rng = np.random.default_rng(seed)
    if sampler is None:
        batch = sample_states(rng, n, density.embed_dim, wide=True)
    else:
        batch = sampler(rng, n)
    e = density.eval(batch.x, batch.u, batch.F, batch.nu, batch.N)
    bound = spec.bound(batch.F, batch.N)
    slack = e - bound
    tol = 1e-10 * np.maximum(1.0, np.abs(e))
    bad = slack < -tol
    worst = None
    if batch.n:
        i = int(np.argmin(slack))
        worst = {"slack": float(slack[i]), "F": batch.F[i], "N": batch.N[i]}
    return GrowthReport(samples=batch.n, violations=int(bad.sum()),
                        min_slack=float(slack.min()), worst=worst)


@dataclass
class ConvexityReport:
    mode: str
    segments: int
    max_defect: float
    scale: float

    @property
    def passed(self) -> bool:
        return self.max_defect <= 1e-10 * self.scale


def check_convexity(density: EnergyDensity, mode: str = "in_N",
                    n_segments: int = 1000, seed: int = 0) -> ConvexityReport:
    """Midpoint convexity probe along random segments.

    in_N freezes (x, u, F, nu) and varies the descriptor gradient alone;
    in_minors_and_N runs on the registered generating function over
    (order-1, order-2, order-3 > 0, N) jointly.  The defect
    e(mid) - (e(a) + e(b))/2 must not be positive beyond round-off.
    """
    rng = np.random.default_rng(seed)
    d = density.embed_dim
    if mode == "in_N":
        base = sample_states(rng, n_segments, d)
        Na = rng.normal(size=(n_segments, d, 3)) * rng.lognormal(0, 0.8, (n_segments, 1, 1))
        Nb = rng.normal(size=(n_segments, d, 3)) * rng.lognormal(0, 0.8, (n_segments, 1, 1))
        ea = density.eval(base.x, base.u, base.F, base.nu, Na)
        eb = density.eval(base.x, base.u, base.F, base.nu, Nb)
        em = density.eval(base.x, base.u, base.F, base.nu, 0.5 * (Na + Nb))
        defect = em - 0.5 * (ea + eb)
        scale = float(np.max(np.abs(np.concatenate([ea, eb, em]))) + 1.0)
        return ConvexityReport(mode=mode, segments=n_segments,
                               max_defect=float(defect.max()), scale=scale)
    if mode == "in_minors_and_N":
        form = density.minors_form()
        if form is None:
            raise GeneratorUnavailableError(
                f"{density.name} registers no minors-space generating function"
            )
        base = sample_states(rng, n_segments, d)

        def draw():
            m1 = rng.normal(size=(n_segments, 3, 3)) * rng.lognormal(0, 0.8, (n_segments, 1, 1))
            m2 = rng.normal(size=(n_segments, 3, 3)) * rng.lognormal(0, 0.8, (n_segments, 1, 1))
            m3 = rng.lognormal(0.0, 1.0, size=n_segments)
            N = rng.normal(size=(n_segments, d, 3))
            return m1, m2, m3, N

        pa, pb = draw(), draw()
        mid = tuple(0.5 * (a + b) for a, b in zip(pa, pb))
        kw = dict(x=base.x, u=base.u, nu=base.nu)
        ea = form(*pa, **kw)
        eb = form(*pb, **kw)
        em = form(*mid, **kw)
        defect = em - 0.5 * (ea + eb)
        scale = float(np.max(np.abs(np.concatenate([ea, eb, em]))) + 1.0)
        return ConvexityReport(mode=mode, segments=n_segments,
                               max_defect=float(defect.max()), scale=scale)
    raise ShapeMismatchError(f"unknown convexity mode {mode!r}")


def gradient_consistency(density: EnergyDensity, n: int = 100, seed: int = 0,
                         step: float = 1e-5) -> dict[str, float]:
    """Central finite-difference check of every analytic derivative.

    Returns the worst relative mismatch per derivative leg over n random
    admissible states (batched; one FD direction per scalar slot).

    Each sample is differenced at three step sizes (step scaled by the
    cube root of the local energy, then x10 and x100) and scored by its
    best step.  No single step resolves every leg: a tiny derivative under
    a large total energy needs a wide step to beat subtraction noise, while
    strong curvature needs a narrow one to beat truncation.  A wrong
    derivative disagrees with the difference quotient at every step.
    """
    rng = np.random.default_rng(seed)
    batch = sample_states(rng, n, density.embed_dim)
    args = {"x": batch.x, "u": batch.u, "F": batch.F, "nu": batch.nu, "N": batch.N}
    legs = {"d_x": "x", "d_u": "u", "d_F": "F", "d_nu": "nu", "d_N": "N"}
    e0 = density.eval(**args)
    h0 = step * np.cbrt(1.0 + np.abs(e0))
    out = {}
    for leg, var in legs.items():
        analytic = getattr(density, leg)(**args)
        base = args[var]
        flat_dims = base.shape[1:]
        axes = tuple(range(1, analytic.ndim))
        na = np.sqrt(np.sum(analytic**2, axis=axes))
        best = None
        for mult in (1.0, 10.0, 100.0):
            h = h0 * mult
            fd = np.zeros_like(analytic)
            for idx in np.ndindex(*flat_dims):
                bump = np.zeros_like(base)
                bump[(slice(None),) + idx] = h
                ep = density.eval(**{**args, var: base + bump})
                em = density.eval(**{**args, var: base - bump})
                fd[(slice(None),) + idx] = (ep - em) / (2.0 * h)
            nf = np.sqrt(np.sum(fd**2, axis=axes))
            diff = np.sqrt(np.sum((analytic - fd) ** 2, axis=axes))
            denom = np.maximum(np.maximum(na, nf), 1e-8 * (1.0 + np.abs(e0)))
            rel = diff / denom
            best = rel if best is None else np.minimum(best, rel)
        out[leg] = float(np.max(best))
    return out
