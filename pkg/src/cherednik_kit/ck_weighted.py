"""
ck_weighted.py: Mirror-degenerate weights near x = 0 and the weighted L^p
questions for the truncated reconstruction operator

    Tf(x) = int K_N(x, y) f(y) w(y) dy.

Weights are handled through their logarithm so that negative powers of
weights that blow up or vanish at the mirror point stay finite.  Integrals
over [-delta, delta] are split into dyadic shells
S_j = {2^{-j-1} delta <= |y| <= 2^{-j} delta}, each integrated by
Gauss-Legendre panels; for the oscillatory Example A family the panels follow
the kinks of |sin(|y|^{-gamma})|.

"""

import logging
import math
import timeit
from collections import namedtuple

import numpy as np

from cherednik_kit.ck_common import require, InvalidInputError, NumericalFailure, float_list
from cherednik_kit.ck_eigenbasis import add_basis_args, validate_basis_options, build_basis
from cherednik_kit.ck_kernel import kernel_spectral, a_factor, local_decompose
from cherednik_kit.ck_quadrature import gauss_legendre
from cherednik_kit.ck_trigpoly import TrigPoly

logger = logging.getLogger(__name__)

POWER = 'power'
POWER_LOG = 'power_log'
EXAMPLE_A = 'example_a'

# Parameters each family takes, in literal order
FAMILY_PARAMETERS = {POWER: ('alpha',), POWER_LOG: ('alpha', 'beta'), EXAMPLE_A: ('alpha', 'beta', 'gamma')}
FAMILY_ALIASES = {'power': POWER, 'powerlog': POWER_LOG, 'power_log': POWER_LOG,
                  'examplea': EXAMPLE_A, 'example_a': EXAMPLE_A}
LITERAL_NAMES = {POWER: 'power', POWER_LOG: 'powerlog', EXAMPLE_A: 'examplea'}

FINITE = 'finite'
DIVERGENT = 'divergent'
INCONCLUSIVE = 'inconclusive'

LEBESGUE = 'lebesgue'
WEIGHTED = 'weighted'

SCAN_CSV_HEADER = ['alpha', 'classification', 'integral_or_bound']

class WeightSpec(object):
    """
    A weight from one of the families

        power       |y|^alpha
        power_log   |y|^alpha (log(e/|y|))^{-beta}
        example_a   |y|^alpha (1 + |sin(|y|^{-gamma})|) (log(e/|y|))^{-beta}, gamma > 0
    """

    def __init__(self, family, alpha, beta=0.0, gamma=None):
        require(family in FAMILY_PARAMETERS, 'Unknown weight family {}'.format(family))
        self.family = family
        self.alpha = float(alpha)
        self.beta = float(beta) if family != POWER else 0.0
        self.gamma = float(gamma) if family == EXAMPLE_A else None
        if family == EXAMPLE_A:
            require(gamma is not None and self.gamma > 0, 'example_a weights need gamma > 0, got {}'.format(gamma))

    @classmethod
    def parse(cls, text):
        """
        Parse power:alpha=1.0, powerlog:alpha=..,beta=.. or examplea:alpha=..,beta=..,gamma=..
        """
        text = str(text).strip()
        family_text, _, parameter_text = text.partition(':')
        family = FAMILY_ALIASES.get(family_text.strip().lower())
        require(family is not None, 'Unknown weight family "{}" in "{}"; expected power, powerlog or examplea'.format(
            family_text, text))
        values = {}
        for token in parameter_text.split(','):
            if not token.strip():
                continue
            name, _, value = token.partition('=')
            name = name.strip()
            require(name in FAMILY_PARAMETERS[family], 'Parameter "{}" does not belong to the {} family'.format(
                name, LITERAL_NAMES[family]))
            try:
                values[name] = float(value)
            except ValueError:
                raise InvalidInputError('Weight parameter {} has non-numeric value "{}"'.format(name, value))
        missing = [name for name in FAMILY_PARAMETERS[family] if name not in values]
        require(not missing, 'Weight literal "{}" is missing {}'.format(text, ', '.join(missing)))
        return cls(family, **values)

    @classmethod
    def from_options(cls, options):
        """ A --weight literal wins; otherwise --family with --alpha/--beta/--gamma """
        if getattr(options, 'weight', None):
            return cls.parse(options.weight)
        family = FAMILY_ALIASES.get(str(options.family).lower())
        require(family is not None, 'Unknown weight family {}'.format(options.family))
        return cls(family, options.alpha, options.beta, options.gamma)

    @property
    def oscillatory(self):
        return self.family == EXAMPLE_A

    def literal(self):
        return '{}:{}'.format(LITERAL_NAMES[self.family], ','.join(
            '{}={}'.format(name, repr(getattr(self, name))) for name in FAMILY_PARAMETERS[self.family]))

    def to_json(self):
        document = {'family': self.family}
        for name in FAMILY_PARAMETERS[self.family]:
            document[name] = getattr(self, name)
        return document

    def log_weight(self, y):
        """ log w(y) for y != 0 (and |y| < e for the log families) """
        magnitude = np.abs(np.asarray(y, dtype=float))
        log_y = np.log(magnitude)
        value = self.alpha * log_y
        if self.family != POWER:
            value = value - self.beta * np.log(1.0 - log_y)
        if self.family == EXAMPLE_A:
            value = value + np.log1p(np.abs(np.sin(magnitude ** (-self.gamma))))
        return value

    def __repr__(self):
        return 'WeightSpec({})'.format(self.literal())

def weight_eval(spec, y, delta=None):
    """
    w(y) by its formula.  y = 0 is rejected; so is |y| > delta when delta is given.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise InvalidInputError('Weights are not evaluated at the mirror point y = 0')
    if delta is not None and np.any(np.abs(y) > delta):
        raise InvalidInputError('Weight evaluated outside [-delta, delta] (delta={})'.format(delta))
    if spec.family != POWER and np.any(np.abs(y) >= math.e):
        raise InvalidInputError('Logarithmic weights need |y| < e')
    values = np.exp(spec.log_weight(y))
    if values.ndim == 0:
        return float(values)
    return values

def cutoff(x, delta):
    """
    Smooth cutoff: 1 on |x| <= delta/2, 0 on |x| >= delta, built from exp(-1/t).
    """
    t = (delta - np.abs(np.asarray(x, dtype=float))) / (0.5 * delta)

    def psi(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        positive = s > 0
        out[positive] = np.exp(-1.0 / s[positive])
        return out

    rising = psi(t)
    falling = psi(1.0 - t)
    values = rising / (rising + falling)
    if values.ndim == 0:
        return float(values)
    return values

def shell_bounds(delta, j):
    return 2.0 ** (-j - 1) * delta, 2.0 ** (-j) * delta

def shell_edges(spec, delta, j, panel_cap=65536):
    """
    Panel edges on the positive half of shell S_j, before any refinement.

    For example_a weights the edges are the kinks of |sin(|y|^{-gamma})|
    (u = |y|^{-gamma} in pi Z), so the panel count grows like the local
    oscillation scale; past panel_cap the panels are uniform in u instead.
    """
    lo, hi = shell_bounds(delta, j)
    if spec.oscillatory:
        u_lo, u_hi = hi ** (-spec.gamma), lo ** (-spec.gamma)
        first, last = math.ceil(u_lo / math.pi), math.floor(u_hi / math.pi)
        kinks = max(0, last - first + 1)
        if kinks + 1 <= panel_cap:
            u_edges = np.concatenate(([u_lo], math.pi * np.arange(first, last + 1), [u_hi]))
            u_edges = np.unique(u_edges)
        else:
            u_edges = np.linspace(u_lo, u_hi, panel_cap + 1)
        edges = np.sort(u_edges ** (-1.0 / spec.gamma))
        edges[0], edges[-1] = lo, hi
    else:
        edges = np.array([lo, hi])
    return edges

def refine_limit(edges, panel_cap):
    """ The largest split of every panel that keeps the rule within panel_cap panels """
    return max(1, panel_cap // max(len(edges) - 1, 1))

def shell_rule(spec, delta, j, order=16, panel_cap=65536, refine=1):
    """
    Gauss-Legendre nodes and weights on the positive half of shell S_j.

    refine splits every panel of shell_edges further, clamped to refine_limit.
    """
    edges = shell_edges(spec, delta, j, panel_cap)
    split = min(max(1, int(refine)), refine_limit(edges, panel_cap))
    if split > 1:
        fractions = np.linspace(0.0, 1.0, split + 1)
        edges = np.concatenate([a + (b - a) * fractions[:-1] for a, b in zip(edges[:-1], edges[1:])] + [[edges[-1]]])

    nodes, weights = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    y = (mid[:, None] + half[:, None] * nodes).ravel()
    w = (half[:, None] * weights).ravel()
    return y, w

def mirror_rule(spec, delta, order=16, shell_max=48, panel_cap=65536):
    """
    Symmetric nodes and weights for integrals over [-delta, delta]: every shell
    on both sides plus one panel on the innermost core.
    """
    ys, ws = [], []
    for j in range(shell_max + 1):
        y, w = shell_rule(spec, delta, j, order, panel_cap)
        ys.append(y)
        ws.append(w)
    core = shell_bounds(delta, shell_max)[0]
    nodes, weights = gauss_legendre(order)
    ys.append(0.5 * core * (nodes + 1.0))
    ws.append(0.5 * core * weights)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    return np.concatenate((-y[::-1], y)), np.concatenate((w[::-1], w))

def _sweep(spec, delta, integrands, primary, shell_max=48, order=16, panel_cap=65536, stop=1e-16):
    """
    Integrate every integrand (a function of log w and y) over each shell,
    both sides.  Stops after shell_max or once the primary shell value drops
    below stop.  Returns {name: array of shell values}.
    """
    values = {name: [] for name in integrands}
    for j in range(shell_max + 1):
        y, w = shell_rule(spec, delta, j, order, panel_cap)
        log_w = spec.log_weight(y)
        for name, integrand in integrands.items():
            shell_value = 2.0 * float(np.dot(w, integrand(log_w, y)))
            if not math.isfinite(shell_value):
                lo, hi = shell_bounds(delta, j)
                raise NumericalFailure('Quadrature of {} failed on shell {} [{:.3e}, {:.3e}]'.format(
                    name, j, lo, hi), details={'shell': j, 'partial_values': values[name]})
            values[name].append(shell_value)
        if j >= 3 and values[primary][-1] < stop:
            break
    return {name: np.array(vals) for name, vals in values.items()}

def classify_shells(values, delta, margin=1e-3, log_margin=5e-2):
    """
    Fit the tail of the shell values.  A geometric ratio below 1 - margin means
    finite, above 1 + margin divergent.  Inside the band the shells are
    compared with powers of log(e/|y|): decay faster than the first power is
    finite, slower divergent, otherwise inconclusive.

    Returns (ratio, log_exponent, classification); log_exponent is None when
    the ratio decided.
    """
    count = len(values)
    start = count // 2 if count >= 8 else 0
    index = np.arange(start, count)
    tail = np.maximum(np.asarray(values[start:], dtype=float), np.finfo(float).tiny)
    ratio = float(math.exp(np.polyfit(index, np.log(tail), 1)[0]))
    if ratio < 1.0 - margin:
        return ratio, None, FINITE
    if ratio > 1.0 + margin:
        return ratio, None, DIVERGENT

    centers = 0.75 * 2.0 ** (-index.astype(float)) * delta
    log_scale = np.log(np.log(math.e / centers))
    log_exponent = float(-np.polyfit(log_scale, np.log(tail), 1)[0])
    if log_exponent > 1.0 + log_margin:
        return ratio, log_exponent, FINITE
    if log_exponent < 1.0 - log_margin:
        return ratio, log_exponent, DIVERGENT
    logger.warning('Shell fit is inconclusive (ratio {:.6f}, log exponent {:.4f})'.format(ratio, log_exponent))
    return ratio, log_exponent, INCONCLUSIVE

def _tail_estimate(values, delta, ratio, log_exponent):
    """ What the shells beyond the last one add, for a finite classification """
    last = values[-1]
    if log_exponent is None:
        return last * ratio / (1.0 - ratio)
    # shells ~ (j + c)^{-q}; the sum past j is about (j + c) / (q - 1) times the last one
    j = len(values) - 1
    offset = (1.0 - math.log(delta)) / math.log(2.0)
    return last * (j + offset) / (log_exponent - 1.0)

class CriterionReport(object):
    """
    Shell-by-shell evaluation of int_{|y| <= delta} w^exponent dy with its
    finiteness verdict.  exponent is -1/(p-1) for the integrability criterion.
    """

    def __init__(self, spec, p, delta, exponent, shell_values, shell_ratio, log_exponent, classification):
        self.spec = spec
        self.p = p
        self.delta = delta
        self.exponent = exponent
        self.shell_values = shell_values
        self.shell_ratio = shell_ratio
        self.log_exponent = log_exponent
        self.classification = classification
        self.partial_sum = float(np.sum(shell_values))
        if classification == FINITE:
            self.integral_estimate = self.partial_sum + _tail_estimate(shell_values, delta, shell_ratio, log_exponent)
            self.upper_bound = self.integral_estimate
        else:
            self.integral_estimate = None
            self.upper_bound = None
            if classification == INCONCLUSIVE and shell_ratio < 1.0:
                self.upper_bound = self.partial_sum + shell_values[-1] * shell_ratio / (1.0 - shell_ratio)

    @property
    def divergent(self):
        return self.classification == DIVERGENT

    @property
    def lower_bound(self):
        return self.partial_sum

    def integral_or_bound(self):
        return self.integral_estimate if self.integral_estimate is not None else self.partial_sum

    def to_json(self):
        return {'weight': self.spec.to_json(), 'p': self.p, 'delta': self.delta, 'exponent': self.exponent,
                'classification': self.classification, 'divergent': self.divergent,
                'integral_estimate': self.integral_estimate, 'lower_bound': self.lower_bound,
                'upper_bound': self.upper_bound, 'shell_ratio': self.shell_ratio,
                'log_exponent': self.log_exponent, 'shell_values': float_list(self.shell_values)}

def _validate_delta(delta):
    require(0 < delta < math.pi / 4, 'delta must be in (0, pi/4), got {}'.format(delta))

def _validate_p_delta(p, delta):
    require(p > 1, 'p must be greater than 1, got {}'.format(p))
    _validate_delta(delta)

def shell_report(spec, p, delta, exponent, shell_max=48, order=16, panel_cap=65536, margin=1e-3, log_margin=5e-2):
    """ CriterionReport for int w^exponent over [-delta, delta] """
    _validate_p_delta(p, delta)
    swept = _sweep(spec, delta, {'integral': lambda log_w, y: np.exp(exponent * log_w)}, 'integral',
                   shell_max, order, panel_cap)
    values = swept['integral']
    ratio, log_exponent, classification = classify_shells(values, delta, margin, log_margin)
    return CriterionReport(spec, p, delta, exponent, values, ratio, log_exponent, classification)

def criterion_integral(spec, p, delta, **params):
    """
    Is int_{|y| <= delta} w^{-1/(p-1)} dy finite?  This decides boundedness of
    f -> int f dy on L^p(w) near the mirror point.
    """
    start_time = timeit.default_timer()
    report = shell_report(spec, p, delta, -1.0 / (p - 1.0), **params)
    logger.info('Criterion for {} at p={}: {} (ratio {:.6f}) in {:.3f} seconds'.format(
        spec.literal(), p, report.classification, report.shell_ratio, timeit.default_timer() - start_time))
    return report

class DualNormReport(object):
    """
    Closed-form dual norm of the model functional under one pairing, with the
    lower bounds given by truncated Holder extremizers f_eps supported on
    eps < |y| <= delta.
    """

    def __init__(self, pairing, p, closed_form_value, criterion, cutoffs, lower_bounds):
        self.pairing = pairing
        self.p = p
        self.closed_form_value = closed_form_value
        self.criterion = criterion
        self.cutoffs = cutoffs
        self.extremizer_lower_bounds = lower_bounds

    @property
    def divergent(self):
        return self.closed_form_value is None

    def to_json(self):
        return {'pairing': self.pairing, 'p': self.p, 'closed_form_value': self.closed_form_value,
                'divergent': self.divergent, 'classification': self.criterion.classification,
                'cutoffs': float_list(self.cutoffs),
                'extremizer_lower_bounds': float_list(self.extremizer_lower_bounds),
                'criterion': self.criterion.to_json()}

def dual_norm(spec, p, delta, pairing=LEBESGUE, shell_max=48, order=16, panel_cap=65536,
              margin=1e-3, log_margin=5e-2):
    """
    Dual norm of Lambda_0 f = int f dy (lebesgue) or Lambda f = int f w dy
    (weighted) on L^p(w) over [-delta, delta].

    lebesgue: (int w^{-p'/p})^{1/p'}, extremizer f = w^{-1/(p-1)}
    weighted: (int w)^{1/p'},         extremizer f = 1
    """
    _validate_p_delta(p, delta)
    require(pairing in (LEBESGUE, WEIGHTED), 'Unknown pairing {}; expected lebesgue or weighted'.format(pairing))
    dual_exponent = p / (p - 1.0)

    if pairing == LEBESGUE:
        closed_exponent = -1.0 / (p - 1.0)
        integrands = {
            'closed': lambda log_w, y: np.exp(closed_exponent * log_w),
            'pairing': lambda log_w, y: np.exp(closed_exponent * log_w),
            'norm': lambda log_w, y: np.exp(p * closed_exponent * log_w + log_w),
        }
    else:
        closed_exponent = 1.0
        integrands = {
            'closed': lambda log_w, y: np.exp(log_w),
            'pairing': lambda log_w, y: np.exp(log_w),
            'norm': lambda log_w, y: np.exp(log_w),
        }

    swept = _sweep(spec, delta, integrands, 'closed', shell_max, order, panel_cap)
    ratio, log_exponent, classification = classify_shells(swept['closed'], delta, margin, log_margin)
    criterion = CriterionReport(spec, p, delta, closed_exponent, swept['closed'], ratio, log_exponent, classification)

    # After shell j the extremizer lives on 2^{-j-1} delta < |y| <= delta
    cutoffs = [shell_bounds(delta, j)[0] for j in range(len(swept['closed']))]
    paired = np.cumsum(swept['pairing'])
    norms = np.cumsum(swept['norm']) ** (1.0 / p)
    lower_bounds = paired / norms

    closed = None
    if classification == FINITE:
        closed = criterion.integral_estimate ** (1.0 / dual_exponent)
    logger.info('Dual norm ({}) for {} at p={}: {}'.format(
        pairing, spec.literal(), p, closed if closed is not None else classification))
    return DualNormReport(pairing, p, closed, criterion, cutoffs, lower_bounds)

def lambda_apply(f, spec, delta, tol=1e-10, order=16, shell_max=48, panel_cap=65536, max_refine=64, max_order=64):
    """
    Lambda f = int_{|y| <= delta} f(y) w(y) dy.

    Every shell is integrated with its panel rule and again with a finer one:
    each panel split in two while the split stays within panel_cap, otherwise
    the same panels at twice the Gauss order.  Refinement continues until two
    successive rules agree to the shell's share of tol, and a shell that still
    disagrees past max_refine splits and max_order nodes raises
    NumericalFailure.  f takes an array of points and may be complex.
    """
    _validate_delta(delta)
    require(tol > 0, 'Tolerance must be positive, got {}'.format(tol))
    share = tol / (shell_max + 2)

    def shell_value(y, w):
        values = np.broadcast_to(f(y), y.shape) * np.exp(spec.log_weight(y))
        mirrored = np.broadcast_to(f(-y), y.shape) * np.exp(spec.log_weight(-y))
        return np.dot(w, values) + np.dot(w, mirrored)

    total = 0
    for j in range(shell_max + 1):
        limit = min(max_refine, refine_limit(shell_edges(spec, delta, j, panel_cap), panel_cap))
        refine, rule_order = 1, order
        coarse = shell_value(*shell_rule(spec, delta, j, rule_order, panel_cap, refine))
        while True:
            if 2 * refine <= limit:
                refine *= 2
            elif 2 * rule_order <= max_order:
                rule_order *= 2
            else:
                lo, hi = shell_bounds(delta, j)
                raise NumericalFailure('Lambda quadrature did not converge on shell {} [{:.3e}, {:.3e}] '
                                       '(split {}, order {}, panel cap {})'.format(j, lo, hi, refine, rule_order,
                                                                                   panel_cap),
                                       details={'shell': j, 'partial_value': total, 'split': refine,
                                                'order': rule_order})
            fine = shell_value(*shell_rule(spec, delta, j, rule_order, panel_cap, refine))
            if abs(fine - coarse) <= share:
                break
            coarse = fine
        total = total + fine

    core = shell_bounds(delta, shell_max)[0]
    nodes, weights = gauss_legendre(order)
    y = 0.5 * core * (nodes + 1.0)
    total = total + shell_value(y, 0.5 * core * weights)
    return complex(total) if np.iscomplexobj(total) else float(total)

class DecomposedApplication(object):
    """
    T f and its pieces on a grid of x in [-delta, delta].

    Tf and Sf use the window |y| <= delta; T_full, T_loc and T_rem use all of
    [-pi, pi] with the weight frozen at its |y| = delta value outside the window.
    """

    def __init__(self, **fields):
        self.__dict__.update(fields)

    def to_json(self):
        def pairs(values):
            return [[float(v.real), float(v.imag)] for v in np.asarray(values, dtype=complex)]
        return {'delta': self.delta, 'x': float_list(self.xs), 'lambda': self.lambda_value,
                'Tf': pairs(self.Tf), 'Sf': pairs(self.Sf), 'T_full': pairs(self.T_full),
                'T_loc': pairs(self.T_loc), 'T_rem': pairs(self.T_rem), 'rhs': pairs(self.rhs),
                'identity_residual': self.identity_residual,
                'x_independence_residual': self.x_independence_residual,
                'split_residual': self.split_residual,
                'remainder_denominator_inf': self.remainder_denominator_inf}

def apply_T_decomposed(f, N, k, spec, delta, basis, localdec, x_points=9, order=16, shell_max=48,
                       panel_cap=65536, outer_panels=16, tol=1e-10):
    """
    Evaluate T f, T_loc f = chi(x) int chi K f w, T_rem f = int (1 - chi chi) K f w,
    S f = int R_N f w, and check Lambda f = (i / gamma^2) (Tf - Sf) / A_N(x) on
    every grid point.  All window integrals share one set of nodes.
    """
    require(localdec.N == N and localdec.k == k, 'Local decomposition was computed for N={} k={}, not N={} k={}'.format(
        localdec.N, localdec.k, N, k))
    if not localdec.A_inf > 0:
        raise InvalidInputError('inf |A_N| > 0 was not established on [-{0}, {0}]'.format(localdec.delta))
    require(localdec.delta <= delta <= localdec.delta_request,
            'Local decomposition window {} does not match delta {}'.format(localdec.delta, delta))
    delta = localdec.delta
    require(x_points >= 2, 'Need at least two x points')

    gamma_sq = basis.gamma_sq(N + 1)
    xs = np.linspace(-delta, delta, x_points)
    a_values = np.asarray(a_factor(N, k, xs, basis))

    y_window, w_window = mirror_rule(spec, delta, order, shell_max, panel_cap)
    g_window = np.broadcast_to(f(y_window), y_window.shape) * np.exp(spec.log_weight(y_window)) * w_window

    nodes, weights = gauss_legendre(order)
    edges = np.linspace(delta, math.pi, outer_panels + 1)
    half = 0.5 * np.diff(edges)
    y_right = ((0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * nodes).ravel()
    w_right = (half[:, None] * weights).ravel()
    y_outer = np.concatenate((-y_right[::-1], y_right))
    w_outer = np.concatenate((w_right[::-1], w_right))
    frozen = math.exp(float(spec.log_weight(delta)))
    g_outer = np.broadcast_to(f(y_outer), y_outer.shape) * frozen * w_outer

    kernel_window = np.asarray(kernel_spectral(N, k, xs[:, None], y_window[None, :], basis))
    kernel_outer = np.asarray(kernel_spectral(N, k, xs[:, None], y_outer[None, :], basis))
    rank_one = gamma_sq / 1j * a_values
    remainder_window = kernel_window - rank_one[:, None]

    Tf = kernel_window @ g_window
    Sf = remainder_window @ g_window
    rhs = (1j / gamma_sq) * (Tf - Sf) / a_values
    lambda_value = lambda_apply(f, spec, delta, tol=tol, order=order, shell_max=shell_max, panel_cap=panel_cap)

    chi_x = cutoff(xs, delta)
    chi_y = cutoff(y_window, delta)
    outer_cut = 1.0 - chi_x[:, None] * chi_y[None, :]
    T_loc = chi_x * (kernel_window @ (chi_y * g_window))
    T_rem = (outer_cut * kernel_window) @ g_window + kernel_outer @ g_outer
    T_full = Tf + kernel_outer @ g_outer

    support_gaps = np.abs(1.0 - np.exp(-1j * (xs[:, None] - y_window[None, :])))[outer_cut > 0]
    outer_gaps = np.abs(1.0 - np.exp(-1j * (xs[:, None] - y_outer[None, :]))).ravel()
    denominator_inf = float(np.min(np.concatenate((support_gaps, outer_gaps))))

    application = DecomposedApplication(
        delta=delta, xs=xs, lambda_value=lambda_value, Tf=Tf, Sf=Sf, T_full=T_full, T_loc=T_loc, T_rem=T_rem,
        rhs=rhs,
        identity_residual=float(np.max(np.abs(lambda_value - rhs))),
        x_independence_residual=float(np.max(np.abs(rhs[:, None] - rhs[None, :]))),
        split_residual=float(np.max(np.abs(T_full - T_loc - T_rem))),
        remainder_denominator_inf=denominator_inf)
    logger.info('Pointwise identity for N={} k={}: residual {:.3e}, x-spread {:.3e}'.format(
        N, k, application.identity_residual, application.x_independence_residual))
    return application

def envelope_check_example_a(alpha, beta, gamma, p, sample_grid=None, points=10000, delta=math.pi / 8):
    """
    Worst signed violation of

        c1 |y|^{-alpha/(p-1)} (log(e/|y|))^{beta/(p-1)} <= w^{-1/(p-1)} <= c2 (same)

    with c1 = 2^{-1/(p-1)}, c2 = 1, over the sample grid (default: points
    log-spaced in [1e-8, delta]).  <= 0 means the sandwich holds; the
    comparison allows a 1e-12 relative rounding margin.
    """
    require(p > 1, 'p must be greater than 1, got {}'.format(p))
    spec = WeightSpec(EXAMPLE_A, alpha, beta, gamma)
    if sample_grid is None:
        sample_grid = np.logspace(-8.0, math.log10(delta), points)
    y = np.asarray(sample_grid, dtype=float)
    require(np.all(y != 0), 'Envelope sample grid must avoid y = 0')

    value = weight_eval(spec, y) ** (-1.0 / (p - 1.0))
    magnitude = np.abs(y)
    envelope = magnitude ** (-alpha / (p - 1.0)) * np.log(math.e / magnitude) ** (beta / (p - 1.0))
    ratio = np.atleast_1d(value / envelope)
    c1 = 2.0 ** (-1.0 / (p - 1.0))
    c2 = 1.0
    slack = 1e-12
    return float(max(np.max(c1 * (1.0 - slack) - ratio), np.max(ratio - c2 * (1.0 + slack))))

ScanResult = namedtuple('ScanResult', ['alpha_star', 'bracket', 'rows'])

def threshold_scan(p, delta, alpha_range, steps=12, **params):
    """
    Bisect on the criterion classification of power(alpha) weights to locate
    the finite/divergent transition.  Each evaluated alpha becomes a row
    (alpha, classification, integral estimate or partial sum).
    """
    _validate_p_delta(p, delta)
    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    require(lo < hi, 'alpha range must be increasing, got {}'.format(alpha_range))
    rows = []

    def classify(alpha):
        report = criterion_integral(WeightSpec(POWER, alpha), p, delta, **params)
        rows.append((alpha, report.classification, report.integral_or_bound()))
        return report.classification

    low_class, high_class = classify(lo), classify(hi)
    if low_class != FINITE or high_class != DIVERGENT:
        raise InvalidInputError('alpha range [{}, {}] does not straddle the transition at p={} '
                                '(classifications {} and {})'.format(lo, hi, p, low_class, high_class))
    for step in range(steps):
        mid = 0.5 * (lo + hi)
        verdict = classify(mid)
        if verdict == FINITE:
            lo = mid
        elif verdict == DIVERGENT:
            hi = mid
        else:
            logger.warning('Inconclusive classification at alpha={}; stopping the scan'.format(mid))
            break
    return ScanResult(0.5 * (lo + hi), (lo, hi), rows)

def shell_params(options):
    """ Shell quadrature settings from the merged config """
    return {'shell_max': options.shell_max, 'order': options.shell_order, 'panel_cap': options.shell_panel_cap}

def add_weight_args(parser):
    parser.add_argument('--weight', type=str, default=None,
                        help='weight literal, e.g. power:alpha=1.0, powerlog:alpha=0.5,beta=1, '
                        'examplea:alpha=0.5,beta=1,gamma=1')
    parser.add_argument('--family', type=str, default=None, choices=['power', 'powerlog', 'examplea'],
                        help='weight family used with --alpha/--beta/--gamma')
    parser.add_argument('--alpha', type=float, default=None, help='weight power at the mirror point')
    parser.add_argument('--beta', type=float, default=None, help='logarithmic exponent')
    parser.add_argument('--gamma', type=float, default=None, help='oscillation exponent (examplea), > 0')
    parser.add_argument('--delta', type=float, default=None, help='window half-width, 0 < delta < pi/4')

def weight_subparser(parser):
    """
    Create a subparser for weight.  Should pass in results of subparsers.add_parser()
    """
    parser.add_argument('action', choices=['criterion', 'dualnorm', 'scan', 'envelope'],
                        help='integrability criterion, dual norms, threshold scan or Example A envelope check')
    add_weight_args(parser)
    parser.add_argument('--p', type=float, default=None, help='Lebesgue exponent p > 1')
    parser.add_argument('--pairing', type=str, default=None, choices=[LEBESGUE, WEIGHTED],
                        help='pairing used by dualnorm')
    parser.add_argument('--alpha-min', dest='alpha_min', type=float, default=None, help='scan range start')
    parser.add_argument('--alpha-max', dest='alpha_max', type=float, default=None, help='scan range end')
    parser.add_argument('--steps', type=int, default=None, help='bisection steps for scan')
    parser.add_argument('--points', dest='envelope_points', type=int, default=None,
                        help='sample count for envelope')

def validate_weight_options(options):
    """
    Throw an error if an invalid combination of options has been selected.
    """
    require(options.p is not None and options.p > 1, '--p must be greater than 1, got {}'.format(options.p))
    require(options.delta is not None and 0 < options.delta < math.pi / 4,
            '--delta must be in (0, pi/4), got {}'.format(options.delta))
    if options.action == 'scan':
        require(options.steps is not None and options.steps >= 1, '--steps must be positive')
    WeightSpec.from_options(options)

def weight_main(context, options):
    """
    cherednik-kit weight criterion|dualnorm|scan|envelope
    """
    validate_weight_options(options)
    p, delta = options.p, options.delta

    if options.action == 'criterion':
        report = criterion_integral(WeightSpec.from_options(options), p, delta,
                                    margin=options.ratio_margin, log_margin=options.log_margin,
                                    **shell_params(options))
        context.write_json(report.to_json())
        return 0

    if options.action == 'dualnorm':
        report = dual_norm(WeightSpec.from_options(options), p, delta, options.pairing,
                           margin=options.ratio_margin, log_margin=options.log_margin, **shell_params(options))
        context.write_json(report.to_json())
        return 0

    if options.action == 'envelope':
        spec = WeightSpec.from_options(options)
        require(spec.family == EXAMPLE_A, 'envelope checks examplea weights, got {}'.format(spec.literal()))
        violation = envelope_check_example_a(spec.alpha, spec.beta, spec.gamma, p,
                                             points=options.envelope_points, delta=delta)
        context.write_json({'weight': spec.to_json(), 'p': p, 'c1': 2.0 ** (-1.0 / (p - 1.0)), 'c2': 1.0,
                            'points': options.envelope_points, 'max_violation': violation,
                            'pass': violation <= 0})
        return 0 if violation <= 0 else 1

    alpha_min = options.alpha_min if options.alpha_min is not None else (p - 1.0) - 0.5
    alpha_max = options.alpha_max if options.alpha_max is not None else (p - 1.0) + 0.5
    result = threshold_scan(p, delta, (alpha_min, alpha_max), options.steps,
                            margin=options.ratio_margin, log_margin=options.log_margin, **shell_params(options))
    width = result.bracket[1] - result.bracket[0]
    found = abs(result.alpha_star - (p - 1.0)) <= max(width, options.scan_tol)
    if options.format == 'json':
        context.write_json({'p': p, 'delta': delta, 'alpha_star': result.alpha_star,
                            'bracket': list(result.bracket), 'expected': p - 1.0, 'pass': found,
                            'rows': [list(row) for row in result.rows]})
    else:
        context.write_csv(SCAN_CSV_HEADER, result.rows)
    return 0 if found else 1

def localize_subparser(parser):
    """
    Create a subparser for localize.  Should pass in results of subparsers.add_parser()
    """
    add_basis_args(parser)
    add_weight_args(parser)
    parser.add_argument('--f', dest='f', type=str, default=None,
                        help='trigonometric polynomial literal (e.g. "0:1,1:0.5") for the pointwise identity check')

def localize_main(context, options):
    """
    cherednik-kit localize: A_N, R_N and delta-shrinking on the mirror-local
    window, optionally with the pointwise identity checked for a given f.
    """
    validate_basis_options(options)
    require(options.delta is not None and 0 < options.delta < math.pi / 4,
            '--delta must be in (0, pi/4), got {}'.format(options.delta))
    basis = build_basis(options.N, options.k, tol=options.tol, threads=options.basis_threads,
                        condition_threshold=options.condition_threshold, check_tol=options.eigen_tol)
    localdec = local_decompose(options.N, options.k, options.delta, basis, grid_points=options.local_grid,
                               max_halvings=options.delta_halvings, a_floor=options.a_floor,
                               patch_points=options.patch_grid)
    document = localdec.to_json()
    code = 0
    if options.f:
        poly = TrigPoly.parse(options.f)
        application = apply_T_decomposed(poly.evaluate, options.N, options.k, WeightSpec.from_options(options),
                                          options.delta, basis, localdec, x_points=options.identity_x_points,
                                          **shell_params(options))
        document['identity_check'] = application.to_json()
        bound = options.identity_tol * (1.0 + abs(application.lambda_value))
        if max(application.identity_residual, application.x_independence_residual) > bound:
            code = 1
    context.write_json(document)
    return code
