"""Frozen reference polynomials exercised throughout the test-suite.

Each entry returns a fresh :class:`~juliacantor.polynomials.Polynomial`
together with hand-checked dynamical facts frozen at generation time.
High-precision parameters are stored as decimal strings so arbitrary
precision orbit computations can re-interpret them exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polynomials import Polynomial, critical_points

# 2400-digit parameter of the cubic z^3 - 3z + t whose bounded critical
# orbit lands on a repelling fixed point after two steps (f^3(1) = f^2(1)),
# computed by a Newton ladder on g(t) = f_t^3(1) - f_t^2(1) and frozen.
# The landing point repels at rate ~3 per step, so the truncated decimal
# keeps the exact orbit inside the escape disk for about 5000 iterations;
# orbit-classification budgets above that will honestly report escape.
LANDING_CUBIC_T = (
    "0.2388408672525811936465933746104603917821793937279454914145297985335918"
    "922295590418806307848768434905062426116242129339555745902193091713120873"
    "065995956153834956700877192027463422580051308862309398049145541195232749"
    "345993801411188989063530929055993757971191768409168188060890624324760219"
    "874188272905944424395597188958427837471458204107862508974681177222838272"
    "971876969087594342130675969944547837594714729901817805774781454912357893"
    "791632876283066063075846895951225444041579383441188340815315846846349095"
    "158602696697496415732460786923863613044752431999973239367250118925738347"
    "221710663482097321958952357764827905509001089672019966252783403774985998"
    "695641605750955839922765324534961225138077296822684460806110798207546764"
    "385314373278534879373581739822957785207424954725377319836752877678861015"
    "509842207642600443298206699809149913161076596807864911252720711571286925"
    "311017942810200807758479325218311678922626270551647508830013048205612598"
    "654897539646454801595800810415000310228350563241754417067007063424731974"
    "671009090942333419286162585045498867631068204170752597409373615397512240"
    "939706033902947303171864496679394670290696507690411497474775768463414388"
    "979172361715405442457142330745099347479543742455311509381829184910864987"
    "726525464591756902004367111875582496846479273147866973781400238299523947"
    "862224906261961708474225327797011240092837275233837707303941428590044051"
    "377056044079789937178129074490347265706918926515706219616527499989226475"
    "212393099122950487516313466621244779190214218647244598448156504132598634"
    "017805300734837157322328293632322896581894290862697915193019748702514142"
    "994823854720086469342438328410996483391988480339995350132222634861751590"
    "237025799140884779955539363633979533957156513924026592270596946270429715"
    "748228579364752779082517610658227996218609963933197085724687400711676576"
    "727480159605372795784957818643536636947819218222277040114797982936475934"
    "934898343351507205338340262436127031250038238281465345999611768480777468"
    "575879648281030531924406961266451629826638727811434250343726443990023041"
    "026727685688168693812835831634175346704253923970798357939074534234865612"
    "935941033540747785242152146387797803860279143228921865718174003569706052"
    "390972248705165505064134650727207994699081002726043281293982848407625151"
    "864448731762326850049027193358267216330564570158683759972757687330275741"
    "243506206313811597144971802435433456736113100822129155613722046653952051"
    "34205481047034961968274235"
)

# (3 - sqrt(5))/2 to 150 digits: the critical point +1 of z^3 - 3z + t is
# exactly 2-periodic with the far-apart cycle {1, -(1+sqrt(5))/2}, so the
# two cycle components of the filled-in set are disjoint and the critical
# component itself has period 2.
SWAP_CUBIC_T = (
    "0.3819660112501051517954131656343618822796908201942371378645513772947395"
    "37181097550292792795810608862515245911924613108247873366137776463068206"
    "819939233"
)

# (3 + sqrt(5))/2 to 150 digits: the critical point +1 of z^3 - 3z + t is
# then exactly 2-periodic (f(1) = t - 2, f(t - 2) = 1).
GOLDEN_CUBIC_T = (
    "2.6180339887498948482045868343656381177203091798057628621354486227052604"
    "62818902449707207204189391137484754088075386891752126633862223536931793"
    "18006077"
)

# 1150-digit truncation of a cubic parameter whose bounded critical point
# +1 makes successively closest returns to itself at the times listed in
# RECURRENT_RETURNS: each record return is roughly the sum of the previous
# two, the signature of persistent recurrence.  The full-precision value
# makes the orbit exactly periodic with period 233; truncation turns the
# cycle into an attracting one whose basin keeps +1 bounded, so the filled
# set is not a Cantor set although no finite tableau depth can see the
# period.  Frozen from a Newton continuation through the record ladder.
RECURRENT_CUBIC_T = (
    "0.236003605507973538447034307890851419425999669402973805312095724681535920"
    "101967569786732284695477983611712655568351753556895752502475874119570703"
    "391416921088116081002794414485459438485799626062458419843720741379675776"
    "777354366410525291411256925616925310988255104401586567944457462429346788"
    "914012739426168516715724711671039354050177401103368213335709212948618674"
    "707767789345406136053241583941754777298589940759979386420964064142224344"
    "186232111308393463663214460663736823500182911968532955890229037273105145"
    "310194789281569244452953626103208283350683236259559352312548515448348866"
    "143862857071730798896874350988131426736031025196436388525793855893984961"
    "614940017683015564267462107918453937864254187084918534647022053700475842"
    "426176148902565449851717096800138173787297917688301761873688995946709740"
    "835960070014659108773729247555219300659603915362092076489343916448807101"
    "241586661267096667410347083511373771585333596757816269485152541379858327"
    "268712333800008664327737097203453436825149647277681574779794944474483938"
    "157311861068721386032125362303094919091036290563329300427504168265159768"
    "2695352381869546858571936235983192931510457041846844377123745230774970"
)

# closest-return record times of +1 under the recurrent cubic, verified at
# 260 to 1250 decimal digits during the continuation and re-checked on the
# truncated parameter up to time 239
RECURRENT_RETURNS = (1, 2, 3, 5, 8, 13, 21, 34, 55, 91, 144, 233)

# fixed puzzle scale used by the deterministic cubics below; it sits under
# the Green value of the escaping critical point -1 for every entry and
# keeps every depth threshold clear of critical values of G.
CUBIC_R0 = 0.08389354597574589

# puzzle scale for z^2 - 6, frozen at 1.5 G(0): the escaping critical
# point sits inside the single depth-0 piece, giving the classical
# one-two-doubling piece-count sequence.
BASILICA_R0 = 1.2741941290448255


@dataclass(frozen=True)
class CorpusEntry:
    """A reference polynomial with frozen expectations."""

    name: str
    polynomial: Polynomial
    cantor: bool | None
    tableau_period: int | None = None
    r0: float | None = None
    notes: str = ""
    piece_counts: tuple[int, ...] = field(default=())


def square() -> CorpusEntry:
    """z^2: connected filled Julia set, one piece per depth."""
    return CorpusEntry(
        name="square",
        polynomial=Polynomial.from_coefficients([0.0, 0.0, 1.0]),
        cantor=False,
        tableau_period=1,
        notes="superattracting fixed critical point, trivial puzzle",
        piece_counts=tuple(1 for _ in range(13)),
    )


def basilica_escape() -> CorpusEntry:
    """z^2 - 6: the only critical point escapes, so the set is Cantor."""
    return CorpusEntry(
        name="basilica_escape",
        polynomial=Polynomial.from_coefficients([-6.0, 0.0, 1.0]),
        cantor=True,
        r0=BASILICA_R0,
        notes="no bounded critical orbit; piece counts double each depth",
        piece_counts=tuple(2**k for k in range(13)),
    )


def _cubic(t) -> Polynomial:
    return Polynomial.from_coefficients([t, -3.0, 0.0, 1.0])


def fixed_cubic() -> CorpusEntry:
    """z^3 - 3z + 3: the critical point +1 is a superattracting fixed point."""
    return CorpusEntry(
        name="fixed_cubic",
        polynomial=_cubic(3.0),
        cantor=False,
        tableau_period=1,
        r0=CUBIC_R0,
        notes="critical component is fixed; -1 escapes",
    )


def golden_cubic() -> CorpusEntry:
    """Cubic with the bounded critical point exactly 2-periodic and the
    two basin lobes joined in a single fixed component."""
    return CorpusEntry(
        name="golden_cubic",
        polynomial=_cubic(GOLDEN_CUBIC_T),
        cantor=False,
        tableau_period=1,
        r0=CUBIC_R0,
        notes="the cycle {1, t - 2} is tight: both points share one filled"
        " component, so the component (and tableau) period is 1",
    )


def swap_cubic() -> CorpusEntry:
    """Cubic whose critical component is genuinely 2-periodic."""
    return CorpusEntry(
        name="swap_cubic",
        polynomial=_cubic(SWAP_CUBIC_T),
        cantor=False,
        tableau_period=2,
        r0=CUBIC_R0,
        notes="cycle {1, -phi} spans two disjoint components swapped by f;"
        " -1 escapes",
    )


def recurrent_cubic() -> CorpusEntry:
    """Cubic whose bounded critical point recurs at record times 1, 2,
    3, 5, 8, ... without ever closing a cycle a finite tableau can see.

    The at-depth classification is persistently recurrent, which makes
    this the reference input for the critical nest and the modulus
    series; the underlying truth is an attracting period-233 cycle, so
    ``cantor`` is False even though every finite-depth verdict reads
    aperiodic-at-depth.
    """
    return CorpusEntry(
        name="recurrent_cubic",
        polynomial=_cubic(RECURRENT_CUBIC_T),
        cantor=False,
        r0=CUBIC_R0,
        notes="closest returns of +1 follow the record ladder"
        " 1,2,3,5,8,13,21,34,55,91,144,233; -1 escapes",
    )


def landing_cubic() -> CorpusEntry:
    """Cubic whose bounded critical orbit lands on a repelling fixed point.

    The bounded critical point +1 never recurs, so its tableau is
    non-critical past a finite row and the Julia set is a Cantor set.
    """
    counts = [2, 5, 14, 41, 122, 365, 1094, 3281, 9842, 29525, 88574, 265721, 797162]
    return CorpusEntry(
        name="landing_cubic",
        polynomial=_cubic(LANDING_CUBIC_T),
        cantor=True,
        r0=CUBIC_R0,
        notes="orbit of +1 hits a repelling fixed point after two steps",
        piece_counts=tuple(counts),
    )


def standard_entries() -> list[CorpusEntry]:
    """The deterministic corpus in a stable order."""
    return [
        square(),
        basilica_escape(),
        fixed_cubic(),
        golden_cubic(),
        swap_cubic(),
        recurrent_cubic(),
        landing_cubic(),
    ]


def sample_all_escaping(seed: int, count: int, budget: int = 4096) -> list[Polynomial]:
    """Draw polynomials whose critical points all escape (certified).

    Rejection-samples monic polynomials of degree 2 to 4 with coefficients
    in a box large enough that escape dominates, keeping those whose
    critical orbit classification certifies every critical point as
    escaping within the budget.
    """
    rng = np.random.default_rng(seed)
    out: list[Polynomial] = []
    while len(out) < count:
        degree = int(rng.integers(2, 5))
        coeffs = rng.uniform(-4.0, 4.0, size=degree) + 1j * rng.uniform(-4.0, 4.0, size=degree)
        p = Polynomial.from_coefficients(list(coeffs) + [1.0])
        try:
            crits = critical_points(p, budget=budget)
        except Exception:
            continue
        if all(c.orbit_status == "escaping" for c in crits):
            out.append(p)
    return out
