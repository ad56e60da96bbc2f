# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk core.

Operation-for-operation transliteration of the pure-Python reference
walks and everything they touch: random streams, signed-distance trees,
coefficient fields, the change of variables, ball kernels, samplers.
Draw order, branch conditions, and the floating-point expression shapes
all match the reference exactly, which is what makes the two backends
produce bit-identical estimates from the same stream.  Nothing here
defines semantics; when the backends disagree, the reference is right
and this file has the bug.

Scene trees and field forests arrive as flat parallel arrays packed by
backend.py (ntype/pofs/params/cofs/ccnt/child); node ids index the
arrays, children are node ids stored in `child`.  Type codes:

  sdf:   0 sphere[center,r]      1 box[center,half]   2 plane[point,n]
         3 union                 4 intersection       5 difference[base,cut]
         6 smooth-union{k}[a,b]  7 rigid{R row-major, t}[child]
  field: 0 constant[c]           1 linear[a,b]        2 exp[c]
         3 bump[center,amplitude,width^2,baseline]
         4 sinusoid[amplitude,phase,offset,freq]
         5 sum                   6 product[l,r]
         7 manufactured-source[alpha,sigma,u(,gamma_w)]

The one deliberate divergence from the reference: distance queries here
do not project the closest boundary point eagerly.  The projection is
deterministic and consumes no random draws, so running it only when a
walk actually terminates gives identical results and skips most of the
work.
"""

from libc.math cimport (INFINITY, M_PI, NAN, cos, exp, expm1, fabs, floor,
                        log, pow, sin, sqrt)
from libc.stdlib cimport free, malloc

from scipy.special.cython_special cimport i0e, i1e, k0e, k1e

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"

ctypedef unsigned long long u64

cdef double TWO_PI = 2.0 * M_PI
cdef double FOUR_PI = 4.0 * M_PI
cdef double TWO_NEG53 = 2.0 ** -53
cdef double HARMONIC_Q = 1e-8
cdef double HEADROOM = 0.05   # _SCREEN_HEADROOM in the reference

cdef enum:
    OK = 0
    FLAGGED = 1          # WalkError: sample is excluded and counted
    ENVELOPE_FAIL = 2    # EnvelopeError: aborts the batch
    BAD_ARG = 3          # ValueError analogs; not reachable from valid input

cdef enum:
    TERM_NONE = 0
    TERM_BOUNDARY = 1
    TERM_MAX = 2
    TERM_ROULETTE = 3

cdef enum:
    ACT_CONT = 0
    ACT_TERM = 1
    ACT_SPLIT = 2

cdef enum:
    EST_CLASSIC = 0
    EST_DT = 1
    EST_NF = 2
    EST_SDE = 3


# -- Philox4x64-10 --------------------------------------------------------

cdef u64 PHILOX_M0 = 0xD2E7470EE14C6C93
cdef u64 PHILOX_M1 = 0xCA5A826395121157
cdef u64 PHILOX_W0 = 0x9E3779B97F4A7C15
cdef u64 PHILOX_W1 = 0xBB67AE8584CAA73B

ctypedef struct Rng:
    u64 k0, k1, block, lane
    u64 buf[4]
    int idx


cdef inline u64 _mulhi(u64 a, u64 b):
    return <u64> (((<u128> a) * b) >> 64)


cdef void rng_init(Rng* r, u64 seed, u64 stream_id, u64 lane):
    r.k0 = seed
    r.k1 = stream_id
    r.block = 0
    r.lane = lane
    r.idx = 4


cdef void _philox_block(Rng* r):
    cdef u64 c0 = r.block, c1 = 0, c2 = 0, c3 = r.lane
    cdef u64 k0 = r.k0, k1 = r.k1
    cdef u64 hi0, lo0, hi1, lo1, n0, n2
    cdef int i
    for i in range(10):
        hi0 = _mulhi(PHILOX_M0, c0)
        lo0 = PHILOX_M0 * c0
        hi1 = _mulhi(PHILOX_M1, c2)
        lo1 = PHILOX_M1 * c2
        n0 = hi1 ^ c1 ^ k0
        n2 = hi0 ^ c3 ^ k1
        c0 = n0
        c1 = lo1
        c2 = n2
        c3 = lo0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    r.buf[0] = c0
    r.buf[1] = c1
    r.buf[2] = c2
    r.buf[3] = c3


cdef inline u64 rng_next(Rng* r):
    cdef u64 v
    if r.idx == 4:
        # pre-increment: the first block runs with counter 1
        r.block = r.block + 1
        _philox_block(r)
        r.idx = 0
    v = r.buf[r.idx]
    r.idx += 1
    return v


cdef inline double rng_u(Rng* r):
    return <double> (rng_next(r) >> 11) * TWO_NEG53


cdef void rng_normal_pair(Rng* r, double* out):
    cdef double u1 = rng_u(r)
    cdef double u2 = rng_u(r)
    cdef double rad = sqrt(-2.0 * log(1.0 - u1))
    cdef double a = 2.0 * M_PI * u2
    out[0] = rad * cos(a)
    out[1] = rad * sin(a)


cdef inline u64 walk_stream_id(u64 point_index, u64 sample_index):
    return ((point_index & 0xFFFFFFFF) << 32) | (sample_index & 0xFFFFFFFF)


# -- small vector helpers (pinned accumulation order) ---------------------

cdef inline double dmax(double a, double b):
    # Python max / min keep the first argument on ties
    return a if a >= b else b


cdef inline double dmin(double a, double b):
    return a if a <= b else b


cdef inline double vdot(double* a, double* b, int n):
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef inline double vnorm(double* v, int n):
    return sqrt(vdot(v, v, n))


# -- evaluation context ---------------------------------------------------

ctypedef struct Ctx:
    int est, dim, max_steps, max_splits, has_window
    double eps, sigma_c, sqs, wmin, wmax, h, a_const, fd_step
    int* sn
    int* spofs
    double* spar
    int* scofs
    int* sccnt
    int* sch
    int sroot
    int* fn
    int* fpofs
    double* fpar
    int* fcofs
    int* fccnt
    int* fch
    int ia, isig, iff, ig, igw
    double* stack_x
    double* stack_w
    long long env_viol
    double err_a, err_b

ctypedef struct WStats:
    long long steps, queries, kevals, splits, overflows
    int term


cdef inline void st_clear(WStats* st):
    st.steps = 0
    st.queries = 0
    st.kevals = 0
    st.splits = 0
    st.overflows = 0
    st.term = TERM_NONE


cdef inline void st_finish(WStats* st, int reason):
    # first branch to finish names the walk's termination
    if st.term == TERM_NONE:
        st.term = reason


# -- signed distance trees ------------------------------------------------

cdef double sdf_value(Ctx* c, int node, double* p):
    cdef int t = c.sn[node]
    cdef double* par = c.spar + c.spofs[node]
    cdef int d = c.dim
    cdef int* ch
    cdef int i, j, n
    cdef double s, dd, q, q_max, out_sq, best, v, da, db, k, h
    cdef double local[3]
    if t == 0:    # sphere
        s = 0.0
        for i in range(d):
            dd = p[i] - par[i]
            s += dd * dd
        return sqrt(s) - par[d]
    if t == 1:    # box
        out_sq = 0.0
        q_max = -INFINITY
        for i in range(d):
            q = fabs(p[i] - par[i]) - par[d + i]
            if q > q_max:
                q_max = q
            if q > 0.0:
                out_sq += q * q
        return sqrt(out_sq) + dmin(q_max, 0.0)
    if t == 2:    # half space
        s = 0.0
        for i in range(d):
            s += (p[i] - par[i]) * par[d + i]
        return s
    ch = c.sch + c.scofs[node]
    n = c.sccnt[node]
    if t == 3:    # union
        best = sdf_value(c, ch[0], p)
        for i in range(1, n):
            v = sdf_value(c, ch[i], p)
            if v < best:
                best = v
        return best
    if t == 4:    # intersection
        best = sdf_value(c, ch[0], p)
        for i in range(1, n):
            v = sdf_value(c, ch[i], p)
            if v > best:
                best = v
        return best
    if t == 5:    # difference
        return dmax(sdf_value(c, ch[0], p), -sdf_value(c, ch[1], p))
    if t == 6:    # smooth union
        k = par[0]
        da = sdf_value(c, ch[0], p)
        db = sdf_value(c, ch[1], p)
        h = dmin(dmax(0.5 + 0.5 * (db - da) / k, 0.0), 1.0)
        return db * (1.0 - h) + da * h - k * h * (1.0 - h)
    # t == 7: rigid motion; fold p into the child frame and recurse
    for i in range(d):
        s = 0.0
        for j in range(d):
            # R^T row i is column i of R
            s += par[j * d + i] * (p[j] - par[d * d + j])
        local[i] = s
    return sdf_value(c, ch[0], local)


cdef void sdf_project(Ctx* c, double* p, double* out):
    # one projection along the numeric gradient plus one refinement
    cdef double x[3]
    cdef double e[3]
    cdef double xp[3]
    cdef double xm[3]
    cdef double g[3]
    cdef double step = c.fd_step
    cdef double dval, gn
    cdef int it, ax, i, d = c.dim
    for i in range(d):
        x[i] = p[i]
    for it in range(2):
        dval = sdf_value(c, c.sroot, x)
        for ax in range(d):
            for i in range(d):
                e[i] = 0.0
            e[ax] = step
            for i in range(d):
                xp[i] = x[i] + e[i]
                xm[i] = x[i] - e[i]
            g[ax] = (sdf_value(c, c.sroot, xp) - sdf_value(c, c.sroot, xm)) / (2.0 * step)
        gn = vnorm(g, d)
        if gn < 1e-12:
            break
        for i in range(d):
            x[i] = x[i] - dval * g[i] / gn
    for i in range(d):
        out[i] = x[i]


# -- coefficient fields ---------------------------------------------------

cdef double fld_value(Ctx* c, int node, double* x):
    cdef int t = c.fn[node]
    cdef double* par = c.fpar + c.fpofs[node]
    cdef int d = c.dim
    cdef int* ch
    cdef int i, n
    cdef double s, dd, peak
    if t == 0:    # constant
        return par[0]
    if t == 1:    # a + b . x
        s = 0.0
        for i in range(d):
            s += par[1 + i] * x[i]
        return par[0] + s
    if t == 2:    # exp(c . x)
        s = 0.0
        for i in range(d):
            s += par[i] * x[i]
        return exp(s)
    if t == 3:    # gaussian bump
        s = 0.0
        for i in range(d):
            dd = x[i] - par[i]
            s += dd * dd
        peak = par[d] * exp(-s / (2.0 * par[d + 1]))
        return par[d + 2] + peak
    if t == 4:    # sinusoid
        s = 0.0
        for i in range(d):
            s += par[3 + i] * x[i]
        return par[2] + par[0] * sin(s + par[1])
    ch = c.fch + c.fcofs[node]
    n = c.fccnt[node]
    if t == 5:    # sum, ascending
        s = 0.0
        for i in range(n):
            s += fld_value(c, ch[i], x)
        return s
    if t == 6:    # product
        return fld_value(c, ch[0], x) * fld_value(c, ch[1], x)
    return manuf_value(c, node, x)


cdef void fld_gradient(Ctx* c, int node, double* x, double* out):
    cdef int t = c.fn[node]
    cdef double* par = c.fpar + c.fpofs[node]
    cdef int d = c.dim
    cdef int* ch
    cdef int i, j, n
    cdef double s, v, peak, coef, lv, rv
    cdef double tmp[3]
    cdef double gl[3]
    cdef double gr[3]
    if t == 0:
        for i in range(d):
            out[i] = 0.0
        return
    if t == 1:
        for i in range(d):
            out[i] = par[1 + i]
        return
    if t == 2:
        v = fld_value(c, node, x)
        for i in range(d):
            out[i] = par[i] * v
        return
    if t == 3:
        s = 0.0
        for i in range(d):
            v = x[i] - par[i]
            s += v * v
        peak = par[d] * exp(-s / (2.0 * par[d + 1]))
        for i in range(d):
            out[i] = peak * (par[i] - x[i]) / par[d + 1]
        return
    if t == 4:
        s = 0.0
        for i in range(d):
            s += par[3 + i] * x[i]
        coef = par[0] * cos(s + par[1])
        for i in range(d):
            out[i] = coef * par[3 + i]
        return
    ch = c.fch + c.fcofs[node]
    n = c.fccnt[node]
    if t == 5:
        fld_gradient(c, ch[0], x, out)
        for i in range(1, n):
            fld_gradient(c, ch[i], x, tmp)
            for j in range(d):
                out[j] = out[j] + tmp[j]
        return
    if t == 6:
        lv = fld_value(c, ch[0], x)
        rv = fld_value(c, ch[1], x)
        fld_gradient(c, ch[0], x, gl)
        fld_gradient(c, ch[1], x, gr)
        for i in range(d):
            out[i] = lv * gr[i] + rv * gl[i]
        return
    for i in range(d):    # manufactured sources are value-only
        out[i] = NAN


cdef double fld_laplacian(Ctx* c, int node, double* x):
    cdef int t = c.fn[node]
    cdef double* par = c.fpar + c.fpofs[node]
    cdef int d = c.dim
    cdef int* ch
    cdef int i, n
    cdef double s, v, peak, w2, k2
    cdef double gl[3]
    cdef double gr[3]
    if t == 0 or t == 1:
        return 0.0
    if t == 2:
        s = 0.0
        for i in range(d):
            s += par[i] * par[i]
        return s * fld_value(c, node, x)
    if t == 3:
        s = 0.0
        for i in range(d):
            v = x[i] - par[i]
            s += v * v
        w2 = par[d + 1]
        peak = par[d] * exp(-s / (2.0 * w2))
        return peak * (s / w2 - <double> d) / w2
    if t == 4:
        k2 = 0.0
        for i in range(d):
            k2 += par[3 + i] * par[3 + i]
        s = 0.0
        for i in range(d):
            s += par[3 + i] * x[i]
        return -k2 * par[0] * sin(s + par[1])
    ch = c.fch + c.fcofs[node]
    n = c.fccnt[node]
    if t == 5:
        s = 0.0
        for i in range(n):
            s += fld_laplacian(c, ch[i], x)
        return s
    if t == 6:
        fld_gradient(c, ch[0], x, gl)
        fld_gradient(c, ch[1], x, gr)
        return (
            fld_value(c, ch[0], x) * fld_laplacian(c, ch[1], x)
            + 2.0 * vdot(gl, gr, d)
            + fld_value(c, ch[1], x) * fld_laplacian(c, ch[0], x)
        )
    return NAN


cdef double manuf_value(Ctx* c, int node, double* x):
    # f = -(alpha lap u + grad alpha . grad u) + sigma u - omega . grad u
    cdef int* ch = c.fch + c.fcofs[node]
    cdef int n = c.fccnt[node]
    cdef int ia = ch[0], isig = ch[1], iu = ch[2]
    cdef int igw = ch[3] if n == 4 else -1
    cdef double gu[3]
    cdef double ga[3]
    cdef double gw[3]
    cdef double om[3]
    cdef double av, val, s2
    cdef int i
    fld_gradient(c, iu, x, gu)
    av = fld_value(c, ia, x)
    fld_gradient(c, ia, x, ga)
    val = -(av * fld_laplacian(c, iu, x) + vdot(ga, gu, c.dim)) \
        + fld_value(c, isig, x) * fld_value(c, iu, x)
    if igw >= 0:
        fld_gradient(c, igw, x, gw)
        s2 = 2.0 * av
        for i in range(c.dim):
            om[i] = s2 * gw[i]
        val = val - vdot(om, gu, c.dim)
    return val


# -- transformed-problem quantities ---------------------------------------

cdef double tp_gamma(Ctx* c, double* x):
    cdef double v = 0.5 * log(fld_value(c, c.ia, x))
    if c.igw >= 0:
        v += fld_value(c, c.igw, x)
    return v


cdef void tp_gamma_grad(Ctx* c, double* x, double* out):
    cdef double ga[3]
    cdef double gg[3]
    cdef double den
    cdef int i
    fld_gradient(c, c.ia, x, ga)
    den = 2.0 * fld_value(c, c.ia, x)
    for i in range(c.dim):
        out[i] = ga[i] / den
    if c.igw >= 0:
        fld_gradient(c, c.igw, x, gg)
        for i in range(c.dim):
            out[i] = out[i] + gg[i]


cdef double tp_gamma_lap(Ctx* c, double* x):
    cdef double ga[3]
    cdef double a = fld_value(c, c.ia, x)
    cdef double v
    fld_gradient(c, c.ia, x, ga)
    v = fld_laplacian(c, c.ia, x) / (2.0 * a) - vdot(ga, ga, c.dim) / (2.0 * a * a)
    if c.igw >= 0:
        v += fld_laplacian(c, c.igw, x)
    return v


cdef double tp_sigma_prime(Ctx* c, double* x):
    cdef double g[3]
    tp_gamma_grad(c, x, g)
    return fld_value(c, c.isig, x) / fld_value(c, c.ia, x) \
        + tp_gamma_lap(c, x) + vdot(g, g, c.dim)


cdef double tp_f_prime(Ctx* c, double* x):
    return exp(tp_gamma(c, x)) * fld_value(c, c.iff, x) / fld_value(c, c.ia, x)


cdef double tp_g_prime(Ctx* c, double* x):
    return exp(tp_gamma(c, x)) * fld_value(c, c.ig, x)


# -- ball kernels ---------------------------------------------------------

cdef double k_q2d(double r, double R, double s):
    cdef double rs = r * s
    cdef double q = R * s
    return k0e(rs) * exp(-rs) - (k0e(q) / i0e(q)) * (i0e(rs) * exp(rs - 2.0 * q))


cdef double k_q3dr(double r, double R, double s):
    cdef double rho = r * s
    cdef double q = R * s
    cdef double num = exp(rho - 2.0 * q) * (-expm1(-2.0 * rho))
    cdef double den = -expm1(-2.0 * q)
    return exp(-rho) - num / den


cdef double k_green_centered_raw(int dim, double r, double R, double sigma, double s):
    if r >= R:
        return 0.0
    if sigma == 0.0 or R * s < HARMONIC_Q:
        if dim == 2:
            return log(R / r) / TWO_PI
        return (1.0 / r - 1.0 / R) / FOUR_PI
    if dim == 2:
        return k_q2d(r, R, s) / TWO_PI
    return k_q3dr(r, R, s) / (FOUR_PI * r)


cdef double k_green_norm(int dim, double R, double sigma, double s):
    cdef double q
    if sigma == 0.0 or R * s < HARMONIC_Q:
        return R * R / 4.0 if dim == 2 else R * R / 6.0
    q = R * s
    if dim == 2:
        return (1.0 - exp(-q) / i0e(q)) / sigma
    return (1.0 - 2.0 * q * exp(-q) / (-expm1(-2.0 * q))) / sigma


cdef double k_poisson_centered(int dim, double R, double sigma, double s):
    cdef double q
    if sigma == 0.0 or R * s < HARMONIC_Q:
        return 1.0 / (TWO_PI * R) if dim == 2 else 1.0 / (FOUR_PI * R * R)
    q = R * s
    if dim == 2:
        return exp(-q) / (TWO_PI * R * i0e(q))
    return 2.0 * q * exp(-q) / (FOUR_PI * R * R * (-expm1(-2.0 * q)))


cdef double k_v2d(double r, double R, double sigma, double s):
    cdef double rs, q
    if sigma == 0.0 or R * s < HARMONIC_Q:
        return 1.0 / r
    rs = r * s
    q = R * s
    return s * (k1e(rs) * exp(-rs) + (k0e(q) / i0e(q)) * (i1e(rs) * exp(rs - 2.0 * q)))


cdef double k_v3d(double r, double R, double sigma, double s):
    cdef double rho, q, t2
    if sigma == 0.0 or R * s < HARMONIC_Q:
        return 1.0 / (r * r)
    rho = r * s
    q = R * s
    t2 = (exp(rho - 2.0 * q) * (1.0 - 1.0 / rho) + exp(-rho - 2.0 * q) * (1.0 + 1.0 / rho)) / (
        -expm1(-2.0 * q)
    )
    return (s / r) * (exp(-rho) * (1.0 + 1.0 / rho) + t2)


cdef double k_bracket_taylor(double x):
    cdef double x2 = x * x
    return x2 / 3.0 + x2 * x2 / 30.0 + x2 * x2 * x2 / 840.0


cdef double k_grad_g_coeff(int dim, double r, double R, double sigma, double s):
    cdef double rho, q, bracket, t2, den
    if sigma == 0.0 or R * s < HARMONIC_Q:
        if dim == 2:
            return (1.0 / (r * r) - 1.0 / (R * R)) / TWO_PI
        return (1.0 / (r * r * r) - 1.0 / (R * R * R)) / FOUR_PI
    rho = r * s
    q = R * s
    if dim == 2:
        bracket = k1e(rho) * exp(-rho) - (k1e(q) / i1e(q)) * (i1e(rho) * exp(rho - 2.0 * q))
        return (s / (TWO_PI * r)) * bracket
    if q < 0.1:
        t2 = k_bracket_taylor(rho) * exp(-q) * (1.0 + 1.0 / q) / k_bracket_taylor(q)
    else:
        den = (1.0 - 1.0 / q) + exp(-2.0 * q) * (1.0 + 1.0 / q)
        t2 = (exp(rho - 2.0 * q) * (1.0 - 1.0 / rho) + exp(-rho - 2.0 * q) * (1.0 + 1.0 / rho)) * (
            1.0 + 1.0 / q
        ) / den
    return (s / (FOUR_PI * r * r)) * (exp(-rho) * (1.0 + 1.0 / rho) - t2)


cdef double k_grad_p_coeff(int dim, double R, double sigma, double s):
    cdef double q, den
    if sigma == 0.0 or R * s < HARMONIC_Q:
        return 1.0 / (M_PI * R * R * R) if dim == 2 else 3.0 / (FOUR_PI * R * R * R * R)
    q = R * s
    if dim == 2:
        return sigma * exp(-q) / (TWO_PI * R * q * i1e(q))
    if q < 0.1:
        return sigma / (FOUR_PI * R * R * k_bracket_taylor(q))
    den = (1.0 - 1.0 / q) + exp(-2.0 * q) * (1.0 + 1.0 / q)
    return sigma * 2.0 * exp(-q) / (FOUR_PI * R * R * den)


cdef double k_radial_density(int dim, double r, double R, double sigma, double s, double norm):
    if r <= 0.0:
        return 0.0
    if sigma == 0.0 or R * s < HARMONIC_Q:
        if dim == 2:
            return 4.0 * r * log(R / r) / (R * R)
        return 6.0 * r * (1.0 - r / R) / (R * R)
    if dim == 2:
        return r * k_q2d(r, R, s) / norm
    return r * k_q3dr(r, R, s) / norm


cdef double k_envelope(double R, double sigma):
    if sigma == 0.0:
        return 2.2 / R
    if R <= sigma:
        return dmax(2.2 * dmax(1.0 / R, 1.0 / sigma), 0.6 * dmax(sqrt(R), sqrt(sigma)))
    return dmax(2.2 * dmin(1.0 / R, 1.0 / sigma), 0.6 * dmin(sqrt(R), sqrt(sigma)))


cdef void k_unit_dir(int dim, Rng* rng, double* out):
    # draw order is normative: 2D one angle draw; 3D height then angle
    cdef double a, z, rho
    if dim == 2:
        a = TWO_PI * rng_u(rng)
        out[0] = cos(a)
        out[1] = sin(a)
        return
    z = 1.0 - 2.0 * rng_u(rng)
    a = TWO_PI * rng_u(rng)
    rho = sqrt(dmax(0.0, 1.0 - z * z))
    out[0] = rho * cos(a)
    out[1] = rho * sin(a)
    out[2] = z


cdef int k_sample_radius(Ctx* c, int dim, double R, double sigma, double s,
                         double norm, Rng* rng, double* out_r):
    # two draws per trial: candidate radius, then the accept test
    cdef double h = k_envelope(R, sigma)
    cdef double r, dens
    cdef int trial
    for trial in range(10000):
        r = R * rng_u(rng)
        dens = k_radial_density(dim, r, R, sigma, s, norm)
        if dens > h:
            c.env_viol += 1
        if rng_u(rng) * h <= dens:
            out_r[0] = r
            return OK
    c.err_a = R
    c.err_b = sigma
    return ENVELOPE_FAIL


cdef int k_sample_green(Ctx* c, int dim, double* center, double R, double sigma,
                        double s, double norm, Rng* rng, double* out_y, double* out_r):
    cdef double dirv[3]
    cdef double r
    cdef int i
    cdef int status = k_sample_radius(c, dim, R, sigma, s, norm, rng, &r)
    if status != OK:
        return status
    k_unit_dir(dim, rng, dirv)
    for i in range(dim):
        out_y[i] = center[i] + r * dirv[i]
    out_r[0] = r
    return OK


cdef void k_sphere_sample(int dim, double R, Rng* rng, double* out):
    cdef double dirv[3]
    cdef int i
    k_unit_dir(dim, rng, dirv)
    for i in range(dim):
        out[i] = R * dirv[i]


cdef int k_green_offcentered(int dim, double* center, double R, double sigma,
                             double s, double* x, double* y, double* out):
    cdef double u[3]
    cdef double v[3]
    cdef double t[3]
    cdef double w, arg2
    cdef int i
    for i in range(dim):
        u[i] = x[i] - center[i]
    if vdot(u, u, dim) >= R * R:
        return BAD_ARG
    for i in range(dim):
        v[i] = y[i] - center[i]
    if vdot(v, v, dim) >= R * R:
        return BAD_ARG
    for i in range(dim):
        t[i] = v[i] - u[i]
    w = vnorm(t, dim)
    if w == 0.0:
        return BAD_ARG
    arg2 = (R * R - vdot(u, v, dim)) / R
    if sigma == 0.0:
        if dim == 2:
            out[0] = log(arg2 / w) / TWO_PI
        else:
            out[0] = (1.0 / w - 1.0 / arg2) / FOUR_PI
        return OK
    if dim == 2:
        out[0] = (k_q2d(w, R, s) - k_q2d(arg2, R, s)) / TWO_PI
    else:
        out[0] = (k_q3dr(w, R, s) / w - k_q3dr(arg2, R, s) / arg2) / FOUR_PI
    return OK


cdef int k_poisson_offcentered(int dim, double* center, double R, double sigma,
                               double s, double* x, double* z, double* out):
    cdef double u[3]
    cdef double v[3]
    cdef double t[3]
    cdef double rv, w, uv, arg2, first, second
    cdef int i
    for i in range(dim):
        u[i] = x[i] - center[i]
    if vdot(u, u, dim) >= R * R:
        return BAD_ARG
    for i in range(dim):
        v[i] = z[i] - center[i]
    rv = vnorm(v, dim)
    if fabs(rv - R) > 1e-9 * R:
        return BAD_ARG
    for i in range(dim):
        t[i] = v[i] - u[i]
    w = vnorm(t, dim)
    uv = vdot(u, v, dim)
    arg2 = (R * R - uv) / R
    if dim == 2:
        first = k_v2d(w, R, sigma, s) * (R * R - uv) / (w * R)
        second = k_v2d(arg2, R, sigma, s) * uv / (R * R)
        out[0] = (first + second) / TWO_PI
        return OK
    first = k_v3d(w, R, sigma, s) * (R * R - uv) / (w * R)
    second = k_v3d(arg2, R, sigma, s) * uv / (R * R)
    out[0] = (first + second) / FOUR_PI
    return OK


# -- weight window --------------------------------------------------------

cdef int w_apply_window(Ctx* c, double w, Rng* rng, double* weight, long long* count):
    cdef double m
    cdef long long n
    if w < c.wmin:
        if rng_u(rng) < w / c.wmin:
            weight[0] = c.wmin
            count[0] = 1
            return ACT_CONT
        weight[0] = 0.0
        count[0] = 0
        return ACT_TERM
    if w > c.wmax:
        m = w / c.wmax
        n = <long long> floor(m)
        if rng_u(rng) < (<double> n + 1.0 - m):
            count[0] = n
        else:
            count[0] = n + 1
        weight[0] = w / m
        return ACT_SPLIT
    weight[0] = w
    count[0] = 1
    return ACT_CONT


# -- walk loops -----------------------------------------------------------

cdef int w_dt_u(Ctx* c, double* x0, Rng* rng, WStats* st, double* out_est):
    cdef double est = 0.0
    cdef double x[3]
    cdef double y[3]
    cdef double tmp[3]
    cdef double bp[3]
    cdef double throughput = 1.0
    cdef double gamma0 = 0.0
    cdef double sd, d, norm, mu, w, sp, track, weight, scaled, r
    cdef long long count, copies
    cdef int i, j, done, status, act, nstack = 0
    cdef int dim = c.dim
    for i in range(dim):
        x[i] = x0[i]
    if c.has_window:
        gamma0 = tp_gamma(c, x)
    while True:
        if st.steps >= c.max_steps:
            sdf_project(c, x, bp)
            est += throughput * tp_g_prime(c, bp)
            st_finish(st, TERM_MAX)
            if nstack > 0:
                nstack -= 1
                for i in range(dim):
                    x[i] = c.stack_x[nstack * 3 + i]
                throughput = c.stack_w[nstack]
                continue
            break
        st.steps += 1
        st.queries += 1
        done = TERM_NONE
        sd = sdf_value(c, c.sroot, x)
        if sd >= 0.0:
            sdf_project(c, x, bp)
            est += throughput * tp_g_prime(c, bp)
            done = TERM_BOUNDARY
        else:
            d = -sd
            if d < c.eps:
                sdf_project(c, x, bp)
                est += throughput * tp_g_prime(c, bp)
                done = TERM_BOUNDARY
        if done == TERM_NONE:
            norm = k_green_norm(dim, d, c.sigma_c, c.sqs)
            st.kevals += 1
            status = k_sample_green(c, dim, x, d, c.sigma_c, c.sqs, norm, rng, y, &r)
            if status != OK:
                return status
            st.kevals += 1
            est += throughput * norm * tp_f_prime(c, y)
            mu = rng_u(rng)
            if mu <= c.sigma_c * norm:
                sp = tp_sigma_prime(c, y)
                w = 1.0 - sp / c.sigma_c
                if w < 0.0:
                    if w < -HEADROOM:
                        return FLAGGED
                    w = 0.0
                throughput = throughput * w
                for i in range(dim):
                    x[i] = y[i]
            else:
                k_sphere_sample(dim, d, rng, tmp)
                for i in range(dim):
                    x[i] = x[i] + tmp[i]
            if c.has_window and throughput > 0.0:
                # the windowed quantity includes the e^{gamma} ratio
                track = throughput * exp(tp_gamma(c, x) - gamma0)
                act = w_apply_window(c, track, rng, &weight, &count)
                if act == ACT_TERM:
                    done = TERM_ROULETTE
                elif act == ACT_CONT:
                    throughput = throughput * (weight / track)
                else:
                    copies = count - 1
                    if nstack + 1 + copies > c.max_splits:
                        st.overflows += 1
                    else:
                        scaled = throughput * (weight / track)
                        for j in range(<int> copies):
                            for i in range(dim):
                                c.stack_x[nstack * 3 + i] = x[i]
                            c.stack_w[nstack] = scaled
                            nstack += 1
                        st.splits += copies
                        throughput = scaled
            if done == TERM_NONE and throughput == 0.0:
                done = TERM_ROULETTE
        if done != TERM_NONE:
            st_finish(st, done)
            if nstack > 0:
                nstack -= 1
                for i in range(dim):
                    x[i] = c.stack_x[nstack * 3 + i]
                throughput = c.stack_w[nstack]
                continue
            break
    out_est[0] = est
    return OK


cdef int w_dt(Ctx* c, double* x0, Rng* rng, WStats* st, double* out):
    cdef double est_u
    cdef int status = w_dt_u(c, x0, rng, st, &est_u)
    if status != OK:
        return status
    out[0] = est_u * exp(-tp_gamma(c, x0))
    return OK


cdef int w_nf(Ctx* c, double* x0, Rng* rng, WStats* st, double* out):
    cdef Rng chain
    cdef double xc[3]
    cdef double z[3]
    cdef double xn[3]
    cdef double xnext[3]
    cdef double tmp[3]
    cdef double bp[3]
    cdef double dirv[3]
    cdef double radius_exponent = 0.5 if c.dim == 2 else 1.0 / 3.0
    cdef double est = 0.0, outer = 1.0
    cdef double sd, d, R, area, volume, boundary_mass, source_sum, w, p_n, g_n
    cdef double r, base, w_null, p_rr, mu, weight
    cdef long long count, copies
    cdef int i, j, done, status, act, first, nstack = 0
    cdef int dim = c.dim
    rng_init(&chain, rng.k0, rng.k1, 1)
    for i in range(dim):
        xc[i] = x0[i]
    while True:
        if st.steps >= c.max_steps:
            sdf_project(c, xc, bp)
            est += outer * tp_g_prime(c, bp)
            st_finish(st, TERM_MAX)
            if nstack > 0:
                nstack -= 1
                for i in range(dim):
                    xc[i] = c.stack_x[nstack * 3 + i]
                outer = c.stack_w[nstack]
                continue
            break
        st.steps += 1
        st.queries += 1
        done = TERM_NONE
        sd = sdf_value(c, c.sroot, xc)
        if sd >= 0.0:
            sdf_project(c, xc, bp)
            est += outer * tp_g_prime(c, bp)
            done = TERM_BOUNDARY
        else:
            d = -sd
            if d < c.eps:
                sdf_project(c, xc, bp)
                est += outer * tp_g_prime(c, bp)
                done = TERM_BOUNDARY
        if done == TERM_NONE:
            R = d
            area = TWO_PI * R if dim == 2 else FOUR_PI * R * R
            volume = M_PI * R * R if dim == 2 else FOUR_PI * R * R * R / 3.0
            k_sphere_sample(dim, R, rng, tmp)
            for i in range(dim):
                z[i] = xc[i] + tmp[i]
            boundary_mass = 0.0
            source_sum = 0.0
            for i in range(dim):
                xn[i] = xc[i]
            w = 1.0
            first = 1
            while True:
                if first:
                    p_n = k_poisson_centered(dim, R, c.sigma_c, c.sqs)
                else:
                    status = k_poisson_offcentered(dim, xc, R, c.sigma_c, c.sqs, xn, z, &p_n)
                    if status != OK:
                        return status
                st.kevals += 1
                boundary_mass += w * p_n * area
                r = R * pow(rng_u(&chain), radius_exponent)
                k_unit_dir(dim, &chain, dirv)
                for i in range(dim):
                    xnext[i] = xc[i] + r * dirv[i]
                if first:
                    if r <= 0.0 or r > R * (1.0 + 1e-9):
                        return BAD_ARG
                    g_n = k_green_centered_raw(dim, r, R, c.sigma_c, c.sqs)
                else:
                    status = k_green_offcentered(dim, xc, R, c.sigma_c, c.sqs, xn, xnext, &g_n)
                    if status != OK:
                        return status
                st.kevals += 1
                base = w * g_n * volume
                source_sum += base * tp_f_prime(c, xnext)
                w_null = c.sigma_c - tp_sigma_prime(c, xnext)
                if w_null < 0.0:
                    if w_null < -HEADROOM * c.sigma_c:
                        return FLAGGED
                    w_null = 0.0
                w = base * w_null
                p_rr = w if w < 1.0 else 1.0
                mu = rng_u(&chain)
                if p_rr <= mu:
                    break
                if p_rr < 1.0:
                    w = 1.0
                first = 0
                for i in range(dim):
                    xn[i] = xnext[i]
            est += outer * source_sum
            outer = outer * boundary_mass
            for i in range(dim):
                xc[i] = z[i]
            if c.has_window and outer > 0.0:
                act = w_apply_window(c, outer, rng, &weight, &count)
                if act == ACT_TERM:
                    done = TERM_ROULETTE
                elif act == ACT_CONT:
                    outer = weight
                else:
                    copies = count - 1
                    if nstack + 1 + copies > c.max_splits:
                        st.overflows += 1
                    else:
                        for j in range(<int> copies):
                            for i in range(dim):
                                c.stack_x[nstack * 3 + i] = xc[i]
                            c.stack_w[nstack] = weight
                            nstack += 1
                        st.splits += copies
                        outer = weight
            if done == TERM_NONE and outer == 0.0:
                done = TERM_ROULETTE
        if done != TERM_NONE:
            st_finish(st, done)
            if nstack > 0:
                nstack -= 1
                for i in range(dim):
                    xc[i] = c.stack_x[nstack * 3 + i]
                outer = c.stack_w[nstack]
                continue
            break
    out[0] = est * exp(-tp_gamma(c, x0))
    return OK


cdef int w_classic(Ctx* c, double* x0, Rng* rng, WStats* st, double* out):
    # c.sigma_c holds sigma/alpha and c.a_const divides the source
    cdef double est = 0.0
    cdef double throughput = 1.0
    cdef double x[3]
    cdef double y[3]
    cdef double tmp[3]
    cdef double bp[3]
    cdef double sd, d, norm, r
    cdef int i, status, dim = c.dim
    for i in range(dim):
        x[i] = x0[i]
    while True:
        if st.steps >= c.max_steps:
            sdf_project(c, x, bp)
            est += throughput * fld_value(c, c.ig, bp)
            st.term = TERM_MAX
            break
        st.steps += 1
        st.queries += 1
        sd = sdf_value(c, c.sroot, x)
        if sd >= 0.0:
            sdf_project(c, x, bp)
            est += throughput * fld_value(c, c.ig, bp)
            st.term = TERM_BOUNDARY
            break
        d = -sd
        if d < c.eps:
            sdf_project(c, x, bp)
            est += throughput * fld_value(c, c.ig, bp)
            st.term = TERM_BOUNDARY
            break
        norm = k_green_norm(dim, d, c.sigma_c, c.sqs)
        st.kevals += 1
        status = k_sample_green(c, dim, x, d, c.sigma_c, c.sqs, norm, rng, y, &r)
        if status != OK:
            return status
        st.kevals += 1
        est += throughput * norm * fld_value(c, c.iff, y) / c.a_const
        # boundary mass P |dB| written as the complement 1 - sigma |G|,
        # exact at sigma = 0 so a pure Laplace walk telescopes to g
        throughput = throughput * (1.0 - c.sigma_c * norm)
        # survival is a probability, so the throughput only shrinks and
        # only the roulette side of the window can trigger
        if c.has_window and throughput < c.wmin:
            if rng_u(rng) < throughput / c.wmin:
                throughput = c.wmin
            else:
                st.term = TERM_ROULETTE
                break
        k_sphere_sample(dim, d, rng, tmp)
        for i in range(dim):
            x[i] = x[i] + tmp[i]
    out[0] = est
    return OK


cdef int w_sde(Ctx* c, double* x0, Rng* rng, WStats* st, double* out):
    cdef double x[3]
    cdef double xn[3]
    cdef double bp[3]
    cdef double om[3]
    cdef double ga[3]
    cdef double gw[3]
    cdef double drift[3]
    cdef double noise[3]
    cdef double pair[2]
    cdef double pair2[2]
    cdef double transmittance = 1.0
    cdef double source = 0.0
    cdef double a_val, std, s2, sd
    cdef int i, dim = c.dim
    for i in range(dim):
        x[i] = x0[i]
    while True:
        if st.steps >= c.max_steps:
            sdf_project(c, x, bp)
            out[0] = source + transmittance * fld_value(c, c.ig, bp)
            st.term = TERM_MAX
            return OK
        st.steps += 1
        a_val = fld_value(c, c.ia, x)
        source = source + transmittance * 0.5 * fld_value(c, c.iff, x) * c.h
        transmittance = transmittance * exp(-0.5 * fld_value(c, c.isig, x) * c.h)
        if c.igw >= 0:
            fld_gradient(c, c.igw, x, gw)
            s2 = 2.0 * a_val
            for i in range(dim):
                om[i] = s2 * gw[i]
        else:
            for i in range(dim):
                om[i] = 0.0
        fld_gradient(c, c.ia, x, ga)
        for i in range(dim):
            drift[i] = 0.5 * (om[i] + ga[i]) * c.h
        std = sqrt(a_val * c.h)
        rng_normal_pair(rng, pair)
        noise[0] = std * pair[0]
        noise[1] = std * pair[1]
        if dim == 3:
            rng_normal_pair(rng, pair2)
            noise[2] = std * pair2[0]
        for i in range(dim):
            xn[i] = x[i] + drift[i] + noise[i]
        st.queries += 1
        sd = sdf_value(c, c.sroot, xn)
        if not sd < 0.0:
            sdf_project(c, xn, bp)
            out[0] = source + transmittance * fld_value(c, c.ig, bp)
            st.term = TERM_BOUNDARY
            return OK
        for i in range(dim):
            x[i] = xn[i]


cdef int w_gradient(Ctx* c, double* x0, Rng* rng, WStats* st,
                    double* out_grad, double* out_u):
    cdef double x[3]
    cdef double y[3]
    cdef double z[3]
    cdef double tmp[3]
    cdef double gg[3]
    cdef double gp[3]
    cdef double gbu[3]
    cdef double ggam[3]
    cdef double sd, d, R, norm, r, pdf_y, rr, rv, cg, cp, area
    cdef double u_y, u_z, u_x, interior, s1, s2, scale, u_val
    cdef int i, status, dim = c.dim
    for i in range(dim):
        x[i] = x0[i]
    st.queries += 1
    sd = sdf_value(c, c.sroot, x)
    if sd >= 0.0:
        return BAD_ARG
    d = -sd
    if d <= c.eps:
        return FLAGGED
    R = d
    norm = k_green_norm(dim, R, c.sigma_c, c.sqs)
    status = k_sample_green(c, dim, x, R, c.sigma_c, c.sqs, norm, rng, y, &r)
    if status != OK:
        return status
    st.kevals += 1
    pdf_y = k_green_centered_raw(dim, r, R, c.sigma_c, c.sqs) / norm
    k_sphere_sample(dim, R, rng, tmp)
    for i in range(dim):
        z[i] = x[i] + tmp[i]
    for i in range(dim):
        tmp[i] = y[i] - x[i]
    if vdot(tmp, tmp, dim) >= R * R:
        return BAD_ARG
    rr = vnorm(tmp, dim)
    if rr == 0.0:
        return BAD_ARG
    cg = k_grad_g_coeff(dim, rr, R, c.sigma_c, c.sqs)
    for i in range(dim):
        gg[i] = cg * tmp[i]
    st.kevals += 1
    for i in range(dim):
        tmp[i] = z[i] - x[i]
    rv = vnorm(tmp, dim)
    if fabs(rv - R) > 1e-9 * R:
        return BAD_ARG
    cp = k_grad_p_coeff(dim, R, c.sigma_c, c.sqs)
    for i in range(dim):
        gp[i] = cp * tmp[i]
    st.kevals += 1
    # the three unknown U values, back to back on the same stream
    status = w_dt_u(c, y, rng, st, &u_y)
    if status != OK:
        return status
    status = w_dt_u(c, z, rng, st, &u_z)
    if status != OK:
        return status
    status = w_dt_u(c, x, rng, st, &u_x)
    if status != OK:
        return status
    interior = tp_f_prime(c, y) + (c.sigma_c - tp_sigma_prime(c, y)) * u_y
    area = TWO_PI * R if dim == 2 else FOUR_PI * R * R
    s1 = interior / pdf_y
    s2 = u_z * area
    for i in range(dim):
        gbu[i] = gg[i] * s1 + gp[i] * s2
    scale = exp(-tp_gamma(c, x))
    u_val = u_x * scale
    tp_gamma_grad(c, x, ggam)
    for i in range(dim):
        out_grad[i] = gbu[i] * scale - u_val * ggam[i]
    out_u[0] = u_val
    return OK


# -- pack plumbing --------------------------------------------------------

cdef class PackView:
    """Borrowed view of a packed problem; owns only the split stacks."""

    cdef Ctx c
    cdef object _pack
    cdef long long[::1] _imeta
    cdef double[::1] _dmeta
    cdef int[::1] _sn
    cdef int[::1] _spofs
    cdef double[::1] _spar
    cdef int[::1] _scofs
    cdef int[::1] _sccnt
    cdef int[::1] _sch
    cdef int[::1] _fn
    cdef int[::1] _fpofs
    cdef double[::1] _fpar
    cdef int[::1] _fcofs
    cdef int[::1] _fccnt
    cdef int[::1] _fch
    cdef u64 seed

    def __cinit__(self, pack):
        (imeta, dmeta, seed, sn, spofs, spar, scofs, sccnt, sch,
         fn, fpofs, fpar, fcofs, fccnt, fch) = pack
        self._pack = pack
        self._imeta = imeta
        self._dmeta = dmeta
        self._sn = sn
        self._spofs = spofs
        self._spar = spar
        self._scofs = scofs
        self._sccnt = sccnt
        self._sch = sch
        self._fn = fn
        self._fpofs = fpofs
        self._fpar = fpar
        self._fcofs = fcofs
        self._fccnt = fccnt
        self._fch = fch
        self.seed = <u64> seed
        self.c.est = <int> imeta[0]
        self.c.dim = <int> imeta[1]
        self.c.max_steps = <int> imeta[2]
        self.c.max_splits = <int> imeta[3]
        self.c.has_window = <int> imeta[4]
        self.c.ia = <int> imeta[5]
        self.c.isig = <int> imeta[6]
        self.c.iff = <int> imeta[7]
        self.c.ig = <int> imeta[8]
        self.c.igw = <int> imeta[9]
        self.c.sroot = <int> imeta[10]
        self.c.eps = dmeta[0]
        self.c.sigma_c = dmeta[1]
        self.c.sqs = sqrt(dmeta[1])
        self.c.wmin = dmeta[2]
        self.c.wmax = dmeta[3]
        self.c.h = dmeta[4]
        self.c.a_const = dmeta[5]
        self.c.fd_step = dmeta[6]
        self.c.sn = &self._sn[0]
        self.c.spofs = &self._spofs[0]
        self.c.spar = &self._spar[0]
        self.c.scofs = &self._scofs[0]
        self.c.sccnt = &self._sccnt[0]
        self.c.sch = &self._sch[0] if self._sch.shape[0] > 0 else NULL
        self.c.fn = &self._fn[0]
        self.c.fpofs = &self._fpofs[0]
        self.c.fpar = &self._fpar[0]
        self.c.fcofs = &self._fcofs[0]
        self.c.fccnt = &self._fccnt[0]
        self.c.fch = &self._fch[0] if self._fch.shape[0] > 0 else NULL
        self.c.env_viol = 0
        self.c.err_a = 0.0
        self.c.err_b = 0.0
        self.c.stack_x = <double*> malloc((self.c.max_splits + 2) * 3 * sizeof(double))
        self.c.stack_w = <double*> malloc((self.c.max_splits + 2) * sizeof(double))
        if self.c.stack_x == NULL or self.c.stack_w == NULL:
            raise MemoryError("split stack allocation failed")

    def __dealloc__(self):
        if self.c.stack_x != NULL:
            free(self.c.stack_x)
        if self.c.stack_w != NULL:
            free(self.c.stack_w)


cdef int _run_one(Ctx* c, double* xs, Rng* rng, WStats* st, double* est):
    if c.est == EST_DT:
        return w_dt(c, xs, rng, st, est)
    if c.est == EST_NF:
        return w_nf(c, xs, rng, st, est)
    if c.est == EST_CLASSIC:
        return w_classic(c, xs, rng, st, est)
    return w_sde(c, xs, rng, st, est)


_TERM_NAMES = {TERM_NONE: None, TERM_BOUNDARY: "boundary",
               TERM_MAX: "max_steps", TERM_ROULETTE: "roulette"}


# -- batch entry points ---------------------------------------------------

def solve_point(pack, double[::1] x, long long point_index, long long spp):
    """All walks for one point: Welford state plus pooled statistics.

    Returns ("ok", n, mean, m2, flagged, steps, queries, kernel_evals,
    splits, split_overflows, n_boundary, n_max_steps, n_roulette,
    envelope_violations) or an error tuple ("envelope", R, sigma) /
    ("badarg",).
    """
    cdef PackView pv = PackView(pack)
    cdef Ctx* c = &pv.c
    cdef Rng rng
    cdef WStats st
    cdef double xs[3]
    cdef double est
    cdef double mean = 0.0, m2 = 0.0, delta
    cdef long long sample, n = 0, flagged = 0
    cdef long long steps = 0, queries = 0, kevals = 0, splits = 0, overflows = 0
    cdef long long nb = 0, nm = 0, nr = 0
    cdef int i, status
    for i in range(c.dim):
        xs[i] = x[i]
    for sample in range(spp):
        rng_init(&rng, pv.seed, walk_stream_id(<u64> point_index, <u64> sample), 0)
        st_clear(&st)
        status = _run_one(c, xs, &rng, &st, &est)
        if status == FLAGGED:
            flagged += 1
            continue
        if status == ENVELOPE_FAIL:
            return ("envelope", c.err_a, c.err_b)
        if status != OK:
            return ("badarg",)
        n += 1
        delta = est - mean
        mean = mean + delta / <double> n
        m2 = m2 + delta * (est - mean)
        steps += st.steps
        queries += st.queries
        kevals += st.kevals
        splits += st.splits
        overflows += st.overflows
        if st.term == TERM_BOUNDARY:
            nb += 1
        elif st.term == TERM_MAX:
            nm += 1
        elif st.term == TERM_ROULETTE:
            nr += 1
    return ("ok", n, mean, m2, flagged, steps, queries, kevals, splits,
            overflows, nb, nm, nr, c.env_viol)


def solve_gradient_point(pack, double[::1] x, long long point_index, long long spp):
    """All gradient walks for one point; per-component Welford states.

    Returns ("ok", n, means, m2s, u_mean, u_m2, flagged,
    envelope_violations) with means/m2s as tuples of length dim.
    """
    cdef PackView pv = PackView(pack)
    cdef Ctx* c = &pv.c
    cdef Rng rng
    cdef WStats st
    cdef double xs[3]
    cdef double grad[3]
    cdef double means[3]
    cdef double m2s[3]
    cdef double u_val, delta
    cdef double u_mean = 0.0, u_m2 = 0.0
    cdef long long sample, n = 0, flagged = 0
    cdef int i, status
    for i in range(c.dim):
        xs[i] = x[i]
        means[i] = 0.0
        m2s[i] = 0.0
    for sample in range(spp):
        rng_init(&rng, pv.seed, walk_stream_id(<u64> point_index, <u64> sample), 0)
        st_clear(&st)
        status = w_gradient(c, xs, &rng, &st, grad, &u_val)
        if status == FLAGGED:
            flagged += 1
            continue
        if status == ENVELOPE_FAIL:
            return ("envelope", c.err_a, c.err_b)
        if status != OK:
            return ("badarg",)
        n += 1
        for i in range(c.dim):
            delta = grad[i] - means[i]
            means[i] = means[i] + delta / <double> n
            m2s[i] = m2s[i] + delta * (grad[i] - means[i])
        delta = u_val - u_mean
        u_mean = u_mean + delta / <double> n
        u_m2 = u_m2 + delta * (u_val - u_mean)
    return ("ok", n, tuple(means[i] for i in range(c.dim)),
            tuple(m2s[i] for i in range(c.dim)), u_mean, u_m2, flagged,
            c.env_viol)


def run_walk(pack, double[::1] x, long long point_index, long long sample_index):
    """One walk, for parity checks against the reference backend."""
    cdef PackView pv = PackView(pack)
    cdef Ctx* c = &pv.c
    cdef Rng rng
    cdef WStats st
    cdef double xs[3]
    cdef double est
    cdef int i, status
    for i in range(c.dim):
        xs[i] = x[i]
    rng_init(&rng, pv.seed, walk_stream_id(<u64> point_index, <u64> sample_index), 0)
    st_clear(&st)
    status = _run_one(c, xs, &rng, &st, &est)
    if status == FLAGGED:
        return ("flagged",)
    if status == ENVELOPE_FAIL:
        return ("envelope", c.err_a, c.err_b)
    if status != OK:
        return ("badarg",)
    return ("ok", est, st.steps, st.queries, st.kevals, _TERM_NAMES[st.term],
            st.splits, st.overflows)


def run_gradient(pack, double[::1] x, long long point_index, long long sample_index):
    """One gradient walk, for parity checks against the reference."""
    cdef PackView pv = PackView(pack)
    cdef Ctx* c = &pv.c
    cdef Rng rng
    cdef WStats st
    cdef double xs[3]
    cdef double grad[3]
    cdef double u_val
    cdef int i, status
    for i in range(c.dim):
        xs[i] = x[i]
    rng_init(&rng, pv.seed, walk_stream_id(<u64> point_index, <u64> sample_index), 0)
    st_clear(&st)
    status = w_gradient(c, xs, &rng, &st, grad, &u_val)
    if status == FLAGGED:
        return ("flagged",)
    if status == ENVELOPE_FAIL:
        return ("envelope", c.err_a, c.err_b)
    if status != OK:
        return ("badarg",)
    return ("ok", tuple(grad[i] for i in range(c.dim)), u_val, st.steps,
            st.queries, st.kevals, _TERM_NAMES[st.term], st.splits, st.overflows)


# -- parity probes --------------------------------------------------------

def philox_raw(seed, stream_id, lane, int count):
    """First `count` raw 64-bit outputs of the addressed stream."""
    cdef Rng r
    rng_init(&r, <u64> seed, <u64> stream_id, <u64> lane)
    return [rng_next(&r) for _ in range(count)]


def philox_uniforms(seed, stream_id, lane, int count):
    cdef Rng r
    rng_init(&r, <u64> seed, <u64> stream_id, <u64> lane)
    return [rng_u(&r) for _ in range(count)]


def philox_normals(seed, stream_id, lane, int count):
    cdef Rng r
    cdef double pair[2]
    cdef int i
    out = []
    rng_init(&r, <u64> seed, <u64> stream_id, <u64> lane)
    for i in range(count):
        rng_normal_pair(&r, pair)
        out.append((pair[0], pair[1]))
    return out


def eval_sdf(pack, double[::1] x):
    cdef PackView pv = PackView(pack)
    cdef double xs[3]
    cdef int i
    for i in range(pv.c.dim):
        xs[i] = x[i]
    return sdf_value(&pv.c, pv.c.sroot, xs)


def eval_project(pack, double[::1] x):
    cdef PackView pv = PackView(pack)
    cdef double xs[3]
    cdef double out[3]
    cdef int i
    for i in range(pv.c.dim):
        xs[i] = x[i]
    sdf_project(&pv.c, xs, out)
    return tuple(out[i] for i in range(pv.c.dim))


cdef int _role_id(Ctx* c, int role) except -2:
    if role == 0:
        return c.ia
    if role == 1:
        return c.isig
    if role == 2:
        return c.iff
    if role == 3:
        return c.ig
    if role == 4:
        return c.igw
    raise ValueError(f"unknown field role {role}")


def eval_field_value(pack, int role, double[::1] x):
    cdef PackView pv = PackView(pack)
    cdef double xs[3]
    cdef int i
    for i in range(pv.c.dim):
        xs[i] = x[i]
    return fld_value(&pv.c, _role_id(&pv.c, role), xs)


def eval_field_gradient(pack, int role, double[::1] x):
    cdef PackView pv = PackView(pack)
    cdef double xs[3]
    cdef double out[3]
    cdef int i
    for i in range(pv.c.dim):
        xs[i] = x[i]
    fld_gradient(&pv.c, _role_id(&pv.c, role), xs, out)
    return tuple(out[i] for i in range(pv.c.dim))


def eval_field_laplacian(pack, int role, double[::1] x):
    cdef PackView pv = PackView(pack)
    cdef double xs[3]
    cdef int i
    for i in range(pv.c.dim):
        xs[i] = x[i]
    return fld_laplacian(&pv.c, _role_id(&pv.c, role), xs)


def eval_transform(pack, double[::1] x):
    """gamma, gamma gradient, sigma', f', g' at x, as a dict."""
    cdef PackView pv = PackView(pack)
    cdef double xs[3]
    cdef double g[3]
    cdef int i
    for i in range(pv.c.dim):
        xs[i] = x[i]
    tp_gamma_grad(&pv.c, xs, g)
    return {
        "gamma": tp_gamma(&pv.c, xs),
        "gamma_gradient": tuple(g[i] for i in range(pv.c.dim)),
        "sigma_prime": tp_sigma_prime(&pv.c, xs),
        "f_prime": tp_f_prime(&pv.c, xs),
        "g_prime": tp_g_prime(&pv.c, xs),
    }


def kernel_probe(name, int dim, double r, double R, double sigma):
    """Scalar kernel cores by name, for bitwise checks against the
    reference implementations."""
    cdef double s = sqrt(sigma)
    cdef double norm
    if name == "green_norm":
        return k_green_norm(dim, R, sigma, s)
    if name == "green_centered":
        return k_green_centered_raw(dim, r, R, sigma, s)
    if name == "poisson_centered":
        return k_poisson_centered(dim, R, sigma, s)
    if name == "envelope":
        return k_envelope(R, sigma)
    if name == "grad_g":
        return k_grad_g_coeff(dim, r, R, sigma, s)
    if name == "grad_p":
        return k_grad_p_coeff(dim, R, sigma, s)
    if name == "q2d":
        return k_q2d(r, R, s)
    if name == "q3dr":
        return k_q3dr(r, R, s)
    if name == "v2d":
        return k_v2d(r, R, sigma, s)
    if name == "v3d":
        return k_v3d(r, R, sigma, s)
    if name == "radial_density":
        norm = k_green_norm(dim, R, sigma, s)
        return k_radial_density(dim, r, R, sigma, s, norm)
    raise ValueError(f"unknown kernel probe {name!r}")


def kernel_offcentered(name, int dim, center, double R, double sigma, x, p):
    """Off-centered G/P values, for bitwise checks."""
    cdef double cbuf[3]
    cdef double xbuf[3]
    cdef double pbuf[3]
    cdef double out
    cdef double s = sqrt(sigma)
    cdef int i, status
    for i in range(dim):
        cbuf[i] = center[i]
        xbuf[i] = x[i]
        pbuf[i] = p[i]
    if name == "green":
        status = k_green_offcentered(dim, cbuf, R, sigma, s, xbuf, pbuf, &out)
    elif name == "poisson":
        status = k_poisson_offcentered(dim, cbuf, R, sigma, s, xbuf, pbuf, &out)
    else:
        raise ValueError(f"unknown off-centered kernel {name!r}")
    if status != OK:
        raise ValueError("kernel argument outside its domain")
    return out
