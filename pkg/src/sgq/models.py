"""Lattice layouts: chains, ladders, transverse-field Ising chains and
corner-coupled ring networks, plus Hamiltonian assembly.

A layout is geometry only: sites carrying (ring, leg, position) labels,
bonds tagged by a named coupling class with a per-bond weight, and
optional single-site field terms.  Numerical coupling values live in a
separate dict (class name -> value) so one layout serves a whole
parameter scan; a bond's strength is always coupling[class] * weight.

Heisenberg classes become S_i.S_j exchange terms when assembled.  The
two Ising classes are special-cased: "ising_field" gives Pauli X site
terms and "ising_lambda" gives Pauli ZZ bond terms, both built with
weight -1 so positive coupling values give H = -sum X - lambda sum ZZ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import hilbert
from .hilbert import SparseOperator

PAULI_BOND_CLASSES = {"ising_lambda"}
PAULI_FIELD_CLASSES = {"ising_field"}


@dataclass(frozen=True)
class Site:
    id: int
    ring: int | None = None
    leg: int | None = None
    position: int = 0


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    cls: str
    weight: float = 1.0


@dataclass(frozen=True)
class FieldTerm:
    site: int
    cls: str
    weight: float = 1.0


@dataclass(frozen=True)
class Corner:
    """A junction where two or three rings meet.

    kind "square": labels u, l (consecutive sites of one ring) and d, r
    (consecutive sites of the other); corner-class bonds (u,l), (d,r);
    glue-class bonds (u,r), (d,l).

    kind "triangular": labels (ul, ur), (lu, ld), (ru, rd), one
    consecutive pair per ring; corner-class bonds are those three pairs,
    glue-class bonds (ul,lu), (ur,ru), (ld,rd).
    """

    kind: str
    rings: tuple
    sites: dict


@dataclass
class LatticeLayout:
    kind: str
    n_sites: int
    sites: list
    bonds: list
    fields: list = field(default_factory=list)
    rings: dict = field(default_factory=dict)
    corners: list = field(default_factory=list)
    default_couplings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def coupling_classes(self):
        classes = {b.cls for b in self.bonds} | {f.cls for f in self.fields}
        return sorted(classes)

    def validate(self):
        ids = {s.id for s in self.sites}
        if ids != set(range(self.n_sites)):
            raise ValueError("site ids must be 0..n_sites-1")
        for b in self.bonds:
            if b.i == b.j:
                raise ValueError(f"self-bond on site {b.i}")
            if b.i not in ids or b.j not in ids:
                raise ValueError(f"bond ({b.i},{b.j}) references a missing site")
        for f in self.fields:
            if f.site not in ids:
                raise ValueError(f"field term on missing site {f.site}")
        # rings must close: walking the ring's NN-class bonds visits every
        # ring site exactly once and comes back
        nn_pairs = {
            frozenset((b.i, b.j))
            for b in self.bonds
            if b.cls in ("J_leg", "J_corner") or b.cls == "ising_lambda"
        }
        for rid, members in self.rings.items():
            L = len(members)
            for k in range(L):
                pair = frozenset((members[k], members[(k + 1) % L]))
                if pair not in nn_pairs:
                    raise ValueError(f"ring {rid} does not close at {tuple(pair)}")

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "n_sites": self.n_sites,
            "sites": [
                {"id": s.id, "ring": s.ring, "leg": s.leg, "position": s.position}
                for s in self.sites
            ],
            "bonds": [
                {"i": b.i, "j": b.j, "cls": b.cls, "weight": b.weight}
                for b in self.bonds
            ],
            "fields": [
                {"site": f.site, "cls": f.cls, "weight": f.weight}
                for f in self.fields
            ],
            "rings": {str(k): list(v) for k, v in self.rings.items()},
            "corners": [
                {"kind": c.kind, "rings": list(c.rings), "sites": dict(c.sites)}
                for c in self.corners
            ],
            "default_couplings": dict(self.default_couplings),
        }

    @staticmethod
    def from_json_dict(d):
        return LatticeLayout(
            kind=d["kind"],
            n_sites=d["n_sites"],
            sites=[Site(s["id"], s["ring"], s["leg"], s["position"]) for s in d["sites"]],
            bonds=[Bond(b["i"], b["j"], b["cls"], b["weight"]) for b in d["bonds"]],
            fields=[FieldTerm(f["site"], f["cls"], f["weight"]) for f in d["fields"]],
            rings={int(k): list(v) for k, v in d["rings"].items()},
            corners=[
                Corner(c["kind"], tuple(c["rings"]), dict(c["sites"]))
                for c in d["corners"]
            ],
            default_couplings=dict(d["default_couplings"]),
        )


def chain_j1j2(L, J1=1.0, J2=0.0, pbc=True):
    """Chain with NN (J_leg) and 2nd-NN (J_2nn) exchange.

    J2 bonds are only laid down when J2 is nonzero, so an open J2=0
    chain has exactly L-1 bonds.  J1=1, J2=0.5 with pbc is the
    fully-dimerized ring whose two NN singlet coverings are exact
    degenerate ground states.
    """
    if L < 4:
        raise ValueError("chain needs L >= 4")
    sites = [Site(n, ring=0 if pbc else None, position=n) for n in range(L)]
    bonds = [Bond(n, (n + 1) % L, "J_leg") for n in range(L if pbc else L - 1)]
    if J2 != 0.0:
        bonds += [Bond(n, (n + 2) % L, "J_2nn") for n in range(L if pbc else L - 2)]
    rings = {0: list(range(L))} if pbc else {}
    defaults = {"J_leg": float(J1)}
    if J2 != 0.0:
        defaults["J_2nn"] = float(J2)
    return LatticeLayout("chain_j1j2", L, sites, bonds, rings=rings,
                         default_couplings=defaults)


def chain_staggered(L, J=1.0, delta=0.0, pbc=True):
    """Chain with alternating bond strengths J(1+delta), J(1-delta).

    Realized as a uniform J_leg class plus a J_stagger_delta class whose
    bonds carry weight (-1)^n, so bond (0,1) is the strong one for
    delta > 0.  Default couplings are {J_leg: J, J_stagger_delta: J*delta}.
    """
    if abs(delta) > 1:
        raise ValueError("|delta| > 1 makes a bond strength negative")
    if pbc and L % 2:
        raise ValueError("periodic staggered chain needs even L")
    if L < 4:
        raise ValueError("chain needs L >= 4")
    sites = [Site(n, ring=0 if pbc else None, position=n) for n in range(L)]
    n_bonds = L if pbc else L - 1
    bonds = [Bond(n, (n + 1) % L, "J_leg") for n in range(n_bonds)]
    bonds += [
        Bond(n, (n + 1) % L, "J_stagger_delta", weight=float((-1) ** n))
        for n in range(n_bonds)
    ]
    rings = {0: list(range(L))} if pbc else {}
    return LatticeLayout(
        "chain_staggered", L, sites, bonds, rings=rings,
        default_couplings={"J_leg": float(J), "J_stagger_delta": float(J * delta)},
    )


def ladder(L, J_leg=1.0, J_2nn=0.0, J_rung=1.0, J_diag=0.0, pbc=True):
    """Two-leg ladder. Site id = leg*L + n; all four classes are always
    laid down so any of them can be ramped later, whatever the defaults.

    Bond count with pbc: 2L legs + 2L leg-2nd-NN + L rungs + 2L diagonals.
    """
    if L < 4:
        raise ValueError("ladder needs L >= 4")
    sites = [Site(leg * L + n, leg=leg, position=n) for leg in (0, 1) for n in range(L)]
    bonds = []
    nb = L if pbc else L - 1
    nb2 = L if pbc else L - 2
    for leg in (0, 1):
        o = leg * L
        bonds += [Bond(o + n, o + (n + 1) % L, "J_leg") for n in range(nb)]
        bonds += [Bond(o + n, o + (n + 2) % L, "J_2nn") for n in range(nb2)]
    bonds += [Bond(n, L + n, "J_rung") for n in range(L)]
    for n in range(nb):
        m = (n + 1) % L
        bonds += [Bond(n, L + m, "J_diag"), Bond(L + n, m, "J_diag")]
    rings = {0: list(range(L)), 1: list(range(L, 2 * L))} if pbc else {}
    return LatticeLayout(
        "ladder", 2 * L, sites, bonds, rings=rings,
        default_couplings={
            "J_leg": float(J_leg), "J_2nn": float(J_2nn),
            "J_rung": float(J_rung), "J_diag": float(J_diag),
        },
    )


def tfim_chain(L, lam=1.0, pbc=False):
    """Transverse-field Ising chain H = -sum_n X_n - lambda sum Z_n Z_{n+1}."""
    if L < 2:
        raise ValueError("tfim chain needs L >= 2")
    sites = [Site(n, ring=0 if pbc else None, position=n) for n in range(L)]
    bonds = [
        Bond(n, (n + 1) % L, "ising_lambda", weight=-1.0)
        for n in range(L if pbc else L - 1)
    ]
    fields = [FieldTerm(n, "ising_field", weight=-1.0) for n in range(L)]
    rings = {0: list(range(L))} if pbc else {}
    return LatticeLayout(
        "tfim_chain", L, sites, bonds, fields=fields, rings=rings,
        default_couplings={"ising_field": 1.0, "ising_lambda": float(lam)},
    )


def corner_plaquette():
    """The isolated 4-spin junction: sites u=0, l=1, d=2, r=3 with
    corner bonds (u,l), (d,r) and glue bonds (u,r), (d,l)."""
    sites = [Site(n, position=n) for n in range(4)]
    bonds = [
        Bond(0, 1, "J_corner"), Bond(2, 3, "J_corner"),
        Bond(0, 3, "J_glue"), Bond(2, 1, "J_glue"),
    ]
    corner = Corner("square", (0, 1), {"u": 0, "l": 1, "d": 2, "r": 3})
    return LatticeLayout(
        "corner_plaquette", 4, sites, bonds, corners=[corner],
        default_couplings={"J_corner": 1.0, "J_glue": 0.0},
    )


def _ring_pair(rings_members, ring, pos):
    members = rings_members[ring]
    return members[pos % len(members)], members[(pos + 1) % len(members)]


def ring_network(rings, corners):
    """Several exchange rings joined at corners.

    Parameters
    ----------
    rings : list of (L, J1, J2)
        One entry per ring; J1/J2 become per-bond weights under the
        J_leg / J_2nn classes (so the classes stay global knobs).
    corners : list of corner specs
        ("square", (ring_a, pos_a), (ring_b, pos_b)) or
        ("triangular", (ra, pa), (rb, pb), (rc, pc)).  Each (ring, pos)
        selects the consecutive site pair (pos, pos+1) of that ring.
        Ring NN bonds inside a corner are re-classed to J_corner; the
        inter-ring glue bonds get class J_glue (weight 1, default 0).
    """
    sites = []
    rings_members = {}
    offset = 0
    ring_J1 = {}
    ring_J2 = {}
    for rid, (L, J1, J2) in enumerate(rings):
        if L < 4 or L % 2:
            raise ValueError("rings must have even L >= 4")
        rings_members[rid] = list(range(offset, offset + L))
        sites += [Site(offset + n, ring=rid, position=n) for n in range(L)]
        ring_J1[rid], ring_J2[rid] = float(J1), float(J2)
        offset += L

    corner_objs = []
    corner_pairs = set()
    used = set()
    for spec in corners:
        kind, legs = spec[0], spec[1:]
        if kind == "square":
            if len(legs) != 2:
                raise ValueError("square corner needs two (ring, pos) legs")
            (ra, pa), (rb, pb) = legs
            u, l = _ring_pair(rings_members, ra, pa)
            d, r = _ring_pair(rings_members, rb, pb)
            labeled = {"u": u, "l": l, "d": d, "r": r}
            glue = [(u, r), (d, l)]
            pairs = [(u, l), (d, r)]
            ring_ids = (ra, rb)
        elif kind == "triangular":
            if len(legs) != 3:
                raise ValueError("triangular corner needs three (ring, pos) legs")
            (ra, pa), (rb, pb), (rc, pc) = legs
            ul, ur = _ring_pair(rings_members, ra, pa)
            lu, ld = _ring_pair(rings_members, rb, pb)
            ru, rd = _ring_pair(rings_members, rc, pc)
            labeled = {"ul": ul, "ur": ur, "lu": lu, "ld": ld, "ru": ru, "rd": rd}
            glue = [(ul, lu), (ur, ru), (ld, rd)]
            pairs = [(ul, ur), (lu, ld), (ru, rd)]
            ring_ids = (ra, rb, rc)
        else:
            raise ValueError(f"unknown corner kind {kind!r}")
        touched = set(labeled.values())
        if used & touched:
            raise ValueError("corners overlap on shared sites")
        used |= touched
        corner_pairs |= {frozenset(p) for p in pairs}
        corner_objs.append(Corner(kind, ring_ids, labeled))

    bonds = []
    for rid, members in rings_members.items():
        L = len(members)
        for n in range(L):
            i, j = members[n], members[(n + 1) % L]
            if frozenset((i, j)) in corner_pairs:
                bonds.append(Bond(i, j, "J_corner"))
            else:
                bonds.append(Bond(i, j, "J_leg", weight=ring_J1[rid]))
        if ring_J2[rid] != 0.0:
            bonds += [
                Bond(members[n], members[(n + 2) % L], "J_2nn", weight=ring_J2[rid])
                for n in range(L)
            ]
    for c in corner_objs:
        if c.kind == "square":
            gl = [(c.sites["u"], c.sites["r"]), (c.sites["d"], c.sites["l"])]
        else:
            gl = [
                (c.sites["ul"], c.sites["lu"]),
                (c.sites["ur"], c.sites["ru"]),
                (c.sites["ld"], c.sites["rd"]),
            ]
        bonds += [Bond(i, j, "J_glue") for i, j in gl]

    defaults = {"J_leg": 1.0, "J_corner": 1.0, "J_glue": 0.0}
    if any(v != 0.0 for v in ring_J2.values()):
        defaults["J_2nn"] = 1.0
    return LatticeLayout(
        "ring_network", offset, sites, bonds, rings=rings_members,
        corners=corner_objs, default_couplings=defaults,
    )


def class_operators(layout, basis):
    """One summed SparseOperator per coupling class (weights included)."""
    if basis.n_sites != layout.n_sites:
        raise ValueError("basis size does not match layout")
    if layout.fields and not basis.full:
        raise ValueError("field terms need the full (sector-free) basis")
    ops = {}
    for b in layout.bonds:
        if b.cls in PAULI_BOND_CLASSES:
            term = b.weight * hilbert.pauli_zz(basis, b.i, b.j)
        else:
            term = b.weight * hilbert.exchange_bond(basis, b.i, b.j)
        ops[b.cls] = term if b.cls not in ops else ops[b.cls] + term
    for f in layout.fields:
        term = f.weight * hilbert.pauli_x(basis, f.site)
        ops[f.cls] = term if f.cls not in ops else ops[f.cls] + term
    return ops


def assemble(layout, couplings, basis):
    """Hamiltonian sum_cls couplings[cls] * (class bond sum).

    Every class present in the layout must have a value; extra values are
    ignored.  Linear in the couplings by construction.
    """
    ops = class_operators(layout, basis)
    missing = sorted(set(ops) - set(couplings))
    if missing:
        raise KeyError(f"no coupling value for classes {missing}")
    total = None
    for cls in sorted(ops):
        term = float(couplings[cls]) * ops[cls]
        total = term if total is None else total + term
    if total is None:
        total = 0.0 * hilbert.identity_operator(basis)
    return total


def hamiltonian(layout, basis, couplings=None):
    """assemble() with the layout's default couplings (optionally overridden)."""
    vals = dict(layout.default_couplings)
    if couplings:
        vals.update(couplings)
    return assemble(layout, vals, basis)
