# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel; same algorithm as _pykernel."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite, pow, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "compiled"
DEF OK = 0
DEF DIVERGED = 1
DEF CHATTER = 2
DEF KI_CLAMP = 0.999
DEF EPS = 1e-9
DEF ROOT_ITERS = 40

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799
cdef double D4 = -10690763975.0 / 1880347072, D5 = 701980252875.0 / 199316789632
cdef double D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423


cdef inline double lk(double i, double L0, double Ic) nogil:
    cdef double x = fabs(i)
    cdef double cap = KI_CLAMP * Ic
    if x > cap:
        x = cap
    x = x / Ic
    return L0 / sqrt(1.0 - x * x)


cdef class Model:
    cdef int N, S, n, nf, form
    cdef double[:, ::1] nr
    cdef double[:, ::1] sr
    cdef int[::1] src
    cdef int[::1] tgt
    cdef int[::1] doff
    cdef double[::1] dt
    cdef double[::1] dv
    cdef double[::1] tail
    cdef double[::1] seg_t
    cdef double[::1] seg_v
    cdef double[::1] seg_s
    cdef double[::1] iin
    cdef double[::1] din

    def __init__(self, a):
        self.N = a["N"]
        self.S = a["S"]
        self.nr = a["nrows"]
        self.sr = a["srows"]
        self.src = a["src"]
        self.tgt = a["tgt"]
        self.doff = a["doff"]
        self.dt = a["dt"]
        self.dv = a["dv"]
        self.tail = a["dtail"]
        self.form = a["form"]
        self.n = 4 * self.N + 5 * self.S
        self.nf = 2 * self.N + self.S
        self.seg_t = np.zeros(self.N)
        self.seg_v = np.zeros(self.N)
        self.seg_s = np.zeros(self.N)
        self.iin = np.zeros(self.N)
        self.din = np.zeros(self.N)

    cdef void select_segments(self, double tref) nogil:
        cdef int k, a, b, j
        for k in range(self.N):
            a = self.doff[k]
            b = self.doff[k + 1]
            if tref < self.dt[a]:
                self.seg_t[k] = self.dt[a]
                self.seg_v[k] = self.dv[a]
                self.seg_s[k] = 0.0
                continue
            j = a
            while j + 1 < b and self.dt[j + 1] <= tref:
                j += 1
            self.seg_t[k] = self.dt[j]
            self.seg_v[k] = self.dv[j]
            if j == b - 1:
                self.seg_s[k] = self.tail[k]
            else:
                self.seg_s[k] = (self.dv[j + 1] - self.dv[j]) / (self.dt[j + 1] - self.dt[j])

    cdef void rhs(self, double t, double* y, signed char* fl, double* dy) nogil:
        cdef int N = self.N, k, s, o
        cdef double i1, i2, i3, i4, i5, d1, d3, d5, x, L1, L2, R1, R2, di
        for k in range(N):
            self.iin[k] = self.seg_v[k] + self.seg_s[k] * (t - self.seg_t[k])
            self.din[k] = self.seg_s[k]
        for s in range(self.S):
            o = 4 * N + 5 * s
            i1 = y[o]; i2 = y[o + 1]; i4 = y[o + 3]; i5 = y[o + 4]
            d1 = (i2 * self.sr[s, 5] - i1 * self.sr[s, 3] * fl[2 * N + s]) / lk(i1, self.sr[s, 0], self.sr[s, 1])
            d3 = (i2 * self.sr[s, 5] - i4 * self.sr[s, 6]) / self.sr[s, 4]
            d5 = (i4 * self.sr[s, 6] - i5 * self.sr[s, 7]) / self.sr[s, 8]
            dy[o] = d1
            dy[o + 1] = -d1 - d3
            dy[o + 2] = d3
            dy[o + 3] = d3 - d5
            dy[o + 4] = d5
            k = self.tgt[s]
            self.iin[k] += i5
            self.din[k] += d5
        for k in range(N):
            o = 4 * k
            i1 = y[o]; i2 = y[o + 1]; i3 = y[o + 2]; i4 = y[o + 3]
            L1 = self.nr[k, 8]; L2 = self.nr[k, 9]; R1 = self.nr[k, 10]; R2 = self.nr[k, 11]
            di = self.din[k]
            d1 = (i2 * R1 - i1 * self.nr[k, 3] * fl[2 * k]) / lk(i1, self.nr[k, 0], self.nr[k, 1])
            d3 = (i4 * R2 - i3 * self.nr[k, 7] * fl[2 * k + 1]) / lk(i3, self.nr[k, 4], self.nr[k, 5])
            x = (L1 * di + i2 * R1 - i4 * R2) / (L1 + L2)
            dy[o] = d1
            dy[o + 2] = d3
            if self.form == 0:
                dy[o + 1] = di - x - d1
                dy[o + 3] = x - d3
            elif self.form == 1:
                dy[o + 1] = -x - d1
                dy[o + 3] = x - d3
            else:
                dy[o + 1] = -x - d1
                dy[o + 3] = (L1 * di + i3 * R1 - i4 * R2) / (L1 + L2) - d3

    cdef double crossing(self, double* y, signed char* fl) nogil:
        cdef double best = -INFINITY, g, a
        cdef int k, s, N = self.N
        for k in range(N):
            a = fabs(y[4 * k])
            g = a - self.nr[k, 1] if fl[2 * k] == 0 else self.nr[k, 2] - a
            if g > best:
                best = g
            a = fabs(y[4 * k + 2])
            g = a - self.nr[k, 5] if fl[2 * k + 1] == 0 else self.nr[k, 6] - a
            if g > best:
                best = g
        for s in range(self.S):
            if fl[2 * self.src[s] + 1]:
                continue
            a = fabs(y[4 * N + 5 * s])
            g = a - self.sr[s, 1] if fl[2 * N + s] == 0 else self.sr[s, 2] - a
            if g > best:
                best = g
        return best

    cdef double margin(self, double* y, signed char* fl, int f) nogil:
        cdef int N = self.N, k, j, s
        cdef double a
        if f < 2 * N:
            k = f // 2
            j = f % 2
            a = fabs(y[4 * k + 2 * j])
            if fl[f] == 0:
                return a - self.nr[k, 1 + 4 * j]
            return self.nr[k, 2 + 4 * j] - a
        s = f - 2 * N
        if fl[2 * self.src[s] + 1]:
            return -INFINITY
        a = fabs(y[4 * N + 5 * s])
        if fl[f] == 0:
            return a - self.sr[s, 1]
        return self.sr[s, 2] - a

    cdef double root_fraction(self, double* ylo, double* yhi, signed char* fl) nogil:
        cdef int f
        cdef double a, b, best = 1.0, q
        for f in range(self.nf):
            b = self.margin(yhi, fl, f)
            if b > 0:
                a = self.margin(ylo, fl, f)
                q = a / (a - b) if a < 0 else 0.0
                if q < best:
                    best = q
        return best

    cdef int transitions(self, double* y, signed char* fl, int* cf, signed char* cv, int cmax,
                         double eps=0.0) nogil:
        """Switching rules applied in index order to a fixed point.  Returns
        the number of changes written to (cf, cv)."""
        cdef int N = self.N, it, k, j, f, s, nch = 0, changed
        cdef double a, ic, ir
        cdef signed char new
        for it in range(8):
            changed = 0
            for k in range(N):
                for j in range(2):
                    f = 2 * k + j
                    a = fabs(y[4 * k + 2 * j])
                    ic = self.nr[k, 1 + 4 * j]
                    ir = self.nr[k, 2 + 4 * j]
                    if fl[f] == 0 and a > ic - eps:
                        fl[f] = 1
                    elif fl[f] == 1 and a < ir + eps:
                        fl[f] = 0
                    else:
                        continue
                    if nch < cmax:
                        cf[nch] = f
                        cv[nch] = fl[f]
                        nch += 1
                    changed = 1
            for s in range(self.S):
                f = 2 * N + s
                a = fabs(y[4 * N + 5 * s])
                new = fl[f]
                if fl[2 * self.src[s] + 1]:
                    new = 1
                elif fl[f] == 0 and a > self.sr[s, 1] - eps:
                    new = 1
                elif fl[f] == 1 and a < self.sr[s, 2] + eps:
                    new = 0
                if new != fl[f]:
                    fl[f] = new
                    if nch < cmax:
                        cf[nch] = f
                        cv[nch] = new
                        nch += 1
                    changed = 1
            if not changed:
                break
        return nch


cdef class Recorder:
    cdef public object times, states, flags, ev_t, ev_f, ev_v
    cdef int n, nf, m, me
    cdef double record_dt, t_last
    cdef double[::1] tv
    cdef double[:, ::1] sv
    cdef signed char[:, ::1] fv
    cdef double[::1] etv
    cdef int[::1] efv
    cdef signed char[::1] evv

    def __init__(self, int n, int nf, double record_dt):
        self.n = n
        self.nf = nf
        self.record_dt = record_dt
        self.t_last = -INFINITY
        self.m = 0
        self.me = 0
        self._grow(1024)
        self._grow_ev(1024)

    def _grow(self, int cap):
        t = np.zeros(cap)
        s = np.zeros((cap, self.n))
        f = np.zeros((cap, self.nf), np.int8)
        if self.m:
            t[:self.m] = self.times[:self.m]
            s[:self.m] = self.states[:self.m]
            f[:self.m] = self.flags[:self.m]
        self.times, self.states, self.flags = t, s, f
        self.tv = t
        self.sv = s
        self.fv = f

    def _grow_ev(self, int cap):
        t = np.zeros(cap)
        f = np.zeros(cap, np.int32)
        v = np.zeros(cap, np.int8)
        if self.me:
            t[:self.me] = self.ev_t[:self.me]
            f[:self.me] = self.ev_f[:self.me]
            v[:self.me] = self.ev_v[:self.me]
        self.ev_t, self.ev_f, self.ev_v = t, f, v
        self.etv = t
        self.efv = f
        self.evv = v

    cdef void sample(self, double t, double* y, signed char* fl, bint force):
        cdef int i
        if not (force or self.record_dt <= 0 or t >= self.t_last + self.record_dt):
            return
        if self.m > 0 and t <= self.tv[self.m - 1]:
            self.m -= 1    # same instant: keep the latest state only
        if self.m >= self.tv.shape[0]:
            self._grow(2 * self.tv.shape[0])
        self.tv[self.m] = t
        for i in range(self.n):
            self.sv[self.m, i] = y[i]
        for i in range(self.nf):
            self.fv[self.m, i] = fl[i]
        self.m += 1
        self.t_last = t

    cdef void events(self, double t, int* cf, signed char* cv, int nch):
        cdef int i
        for i in range(nch):
            if self.me >= self.etv.shape[0]:
                self._grow_ev(2 * self.etv.shape[0])
            self.etv[self.me] = t
            self.efv[self.me] = cf[i]
            self.evv[self.me] = cv[i]
            self.me += 1

    def result(self, int status, int info, double t_last):
        return {
            "times": self.times[:self.m].copy(),
            "states": self.states[:self.m].copy(),
            "flags": self.flags[:self.m].copy(),
            "ev_t": self.ev_t[:self.me].copy(),
            "ev_f": self.ev_f[:self.me].copy(),
            "ev_v": self.ev_v[:self.me].copy(),
            "status": status, "info": info, "t_last": t_last,
        }


cdef class Noise:
    cdef double sigma
    cdef object rng
    cdef double[::1] buf
    cdef int pos

    def __init__(self, double sigma, rng):
        self.sigma = sigma
        self.rng = rng
        self.buf = np.zeros(0)
        self.pos = 0

    cdef double draw(self):
        if self.pos >= self.buf.shape[0]:
            self.buf = self.rng.standard_normal(4096)
            self.pos = 0
        self.pos += 1
        return self.sigma * self.buf[self.pos - 1]

    cdef void apply(self, Model m, double* y):
        cdef int k, s, o
        cdef double e
        for k in range(2 * m.N):
            o = 2 * k
            e = self.draw()
            y[o] += e
            y[o + 1] -= e
        for s in range(m.S):
            o = 4 * m.N + 5 * s
            e = self.draw()
            y[o] += e
            y[o + 1] -= e


cdef class Chatter:
    cdef int cap
    cdef double window
    cdef object times

    def __init__(self, int cap, double window):
        self.cap = cap
        self.window = window
        self.times = []

    cdef bint hit(self, double t, int n):
        cdef double lo = t - self.window
        self.times.extend([t] * n)
        while self.times and self.times[0] < lo:
            self.times.pop(0)
        return len(self.times) > self.cap


cdef inline bint all_finite(double* y, int n) nogil:
    cdef int i
    for i in range(n):
        if not isfinite(y[i]):
            return False
    return True


cdef void dense(double* y, double* y5, double* k1, double* k3, double* k4, double* k5,
                double* k6, double* k7, double h, double th, int n, double* out) nogil:
    cdef int i
    cdef double th1 = 1.0 - th, dy, bspl, q
    for i in range(n):
        dy = y5[i] - y[i]
        bspl = h * k1[i] - dy
        q = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
        out[i] = y[i] + th * (dy + th1 * (bspl + th * (dy - h * k7[i] - bspl + th1 * q)))


def integrate(a, y0, fl0, opts, rng=None):
    cdef Model m = Model(a)
    cdef int n = m.n, nf = m.nf, i, it, nch, ib = 0, nb, status = OK, info = -1
    cdef double t = 0.0, h, t_end = opts["t_end"], rtol = opts["rtol"], atol = opts["atol"]
    cdef double dt_max = opts["dt_max"], dt_event = opts["dt_event"], h_reset = opts["dt_init"]
    cdef double err, acc, e, sc, lo, hi, mid, th, t_next_bp, t_new, fac, cm
    cdef int side
    cdef bint found
    cdef bint hit_bp, event, have_k1 = False, use_noise = opts["noise_sigma"] > 0
    cdef int method = opts["method"]
    cdef double dt_fixed = opts["dt_fixed"]
    cdef Recorder rec = Recorder(n, nf, opts["record_dt"])
    cdef Noise noise = Noise(opts["noise_sigma"], rng) if use_noise else None
    cdef Chatter chat = Chatter(opts["event_cap"], opts["chatter_window"])
    cdef int cmax = 8 * (nf + 1)

    bl = [float(b) for b in a["breakpoints"] if 0 < b < t_end] + [t_end]
    cdef double[::1] bps = np.array(bl, float)
    nb = bps.shape[0]

    cdef int nbuf = max(n, 1)
    cdef double* work = <double*> malloc(13 * nbuf * sizeof(double))
    cdef signed char* fl = <signed char*> malloc(max(nf, 1) * sizeof(signed char))
    cdef int* cf = <int*> malloc(cmax * sizeof(int))
    cdef signed char* cv = <signed char*> malloc(cmax * sizeof(signed char))
    cdef double *y = work, *yt = work + nbuf, *y5 = work + 2 * nbuf, *yd = work + 3 * nbuf
    cdef double *k1 = work + 4 * nbuf, *k2 = work + 5 * nbuf, *k3 = work + 6 * nbuf
    cdef double *k4 = work + 7 * nbuf, *k5 = work + 8 * nbuf, *k6 = work + 9 * nbuf
    cdef double *k7 = work + 10 * nbuf, *tmp
    cdef double *ylo = work + 11 * nbuf, *yhi = work + 12 * nbuf
    cdef double *ynew

    try:
        for i in range(n):
            y[i] = y0[i]
        for i in range(nf):
            fl[i] = fl0[i]
        nch = m.transitions(y, fl, cf, cv, cmax)
        rec.events(t, cf, cv, nch)
        rec.sample(t, y, fl, True)

        if method == 1:
            while t < t_end:
                while ib < nb and bps[ib] <= t + 1e-12:
                    ib += 1
                t_next_bp = bps[ib] if ib < nb else t_end
                h = dt_fixed
                hit_bp = False
                if t + h > t_next_bp - 1e-12:
                    h = t_next_bp - t
                    hit_bp = h != dt_fixed
                t_new = t_next_bp if hit_bp else t + h
                m.select_segments(t + 0.5 * h)
                # a crossing inside the step is placed by linear interpolation
                # and the rest of the step continues with the new flags
                for it in range(16):
                    m.rhs(t, y, fl, k1)
                    for i in range(n):
                        yt[i] = y[i] + h * k1[i]
                    if not all_finite(yt, n):
                        return rec.result(DIVERGED, -1, t)
                    if m.crossing(yt, fl) <= 0:
                        for i in range(n):
                            y[i] = yt[i]
                        break
                    th = m.root_fraction(y, yt, fl)
                    for i in range(n):
                        y[i] += th * (yt[i] - y[i])
                    t += th * h
                    h -= th * h
                    nch = m.transitions(y, fl, cf, cv, cmax, EPS)
                    if nch:
                        rec.events(t, cf, cv, nch)
                        if chat.hit(t, nch):
                            return rec.result(CHATTER, cf[nch - 1], t)
                        rec.sample(t, y, fl, True)
                    if h <= 1e-15:
                        break
                t = t_new
                nch = 0
                if use_noise:
                    noise.apply(m, y)
                    nch = m.transitions(y, fl, cf, cv, cmax)
                if nch:
                    rec.events(t, cf, cv, nch)
                    if chat.hit(t, nch):
                        return rec.result(CHATTER, cf[nch - 1], t)
                rec.sample(t, y, fl, nch > 0 or t >= t_end)
            return rec.result(OK, -1, t)

        h = opts["dt_init"]
        while t < t_end:
            while ib < nb and bps[ib] <= t:
                ib += 1
            t_next_bp = bps[ib] if ib < nb else t_end
            hit_bp = False
            if h >= dt_max:
                h = dt_max
            if t + h >= t_next_bp:
                h = t_next_bp - t
                hit_bp = True
            m.select_segments(t + 0.5 * h)
            if not have_k1:
                m.rhs(t, y, fl, k1)
            for i in range(n):
                yt[i] = y[i] + h * A21 * k1[i]
            m.rhs(t + C2 * h, yt, fl, k2)
            for i in range(n):
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            m.rhs(t + C3 * h, yt, fl, k3)
            for i in range(n):
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            m.rhs(t + C4 * h, yt, fl, k4)
            for i in range(n):
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            m.rhs(t + C5 * h, yt, fl, k5)
            for i in range(n):
                yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                    + A65 * k5[i])
            m.rhs(t + h, yt, fl, k6)
            for i in range(n):
                y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            m.rhs(t + h, y5, fl, k7)
            acc = 0.0
            for i in range(n):
                e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                         + E7 * k7[i])
                sc = atol + rtol * max(fabs(y[i]), fabs(y5[i]))
                acc += (e / sc) * (e / sc)
            err = sqrt(acc / n) if n else 0.0
            if not isfinite(err):
                err = 1e10
            if err > 1.0:
                h *= max(0.2, 0.9 * pow(err, -0.2))
                have_k1 = True
                if h < 1e-14:
                    return rec.result(DIVERGED, -1, t)
                continue
            event = m.crossing(y5, fl) > 0
            ynew = y5
            if event:
                lo = 0.0
                hi = 1.0
                for i in range(n):
                    ylo[i] = y[i]
                    yhi[i] = y5[i]
                while (hi - lo) * h > dt_event:
                    mid = 0.5 * (lo + hi)
                    dense(y, y5, k1, k3, k4, k5, k6, k7, h, mid, n, yd)
                    if m.crossing(yd, fl) > 0:
                        hi = mid
                        tmp = yhi; yhi = yd; yd = tmp
                    else:
                        lo = mid
                        tmp = ylo; ylo = yd; yd = tmp
                # regula falsi inside the bracket, falling back to bisection
                # whenever the same end moves twice in a row
                found = False
                side = 0
                for it in range(ROOT_ITERS):
                    if side == 2 or side == -2:
                        th = 0.5 * (lo + hi)
                    else:
                        th = lo + (hi - lo) * m.root_fraction(ylo, yhi, fl)
                    dense(y, y5, k1, k3, k4, k5, k6, k7, h, th, n, yd)
                    cm = m.crossing(yd, fl)
                    if -EPS < cm <= EPS:
                        found = True
                        break
                    if cm > 0:
                        hi = th
                        tmp = yhi; yhi = yd; yd = tmp
                        side = side + 1 if side > 0 else 1
                    else:
                        lo = th
                        tmp = ylo; ylo = yd; yd = tmp
                        side = side - 1 if side < 0 else -1
                if found:
                    ynew = yd
                else:
                    th = hi
                    ynew = yhi
                t_new = t + th * h
                hit_bp = hit_bp and th == 1.0
            else:
                t_new = t + h
            if hit_bp:
                t_new = t_next_bp
            if not all_finite(ynew, n):
                return rec.result(DIVERGED, -1, t)
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
            nch = 0
            if event:
                nch = m.transitions(y, fl, cf, cv, cmax, EPS)
            if use_noise:
                noise.apply(m, y)
                nch += m.transitions(y, fl, cf + nch, cv + nch, cmax - nch)
            if nch:
                rec.events(t, cf, cv, nch)
                if chat.hit(t, nch):
                    return rec.result(CHATTER, cf[nch - 1], t)
            rec.sample(t, y, fl, nch > 0 or t >= t_end)
            fac = min(5.0, max(0.2, 0.9 * pow(err, -0.2))) if err > 0 else 5.0
            h = h * fac
            if nch:
                h = min(h, h_reset)
            if nch or hit_bp or use_noise or ynew != y5:
                have_k1 = False
            else:
                tmp = k1
                k1 = k7
                k7 = tmp
                have_k1 = True
        return rec.result(OK, -1, t)
    finally:
        free(work)
        free(fl)
        free(cf)
        free(cv)


def rhs(a, double t, y, fl):
    cdef Model m = Model(a)
    cdef double[::1] yv = np.ascontiguousarray(y, float)
    cdef signed char[::1] fv = np.ascontiguousarray(fl, np.int8)
    out = np.zeros(m.n)
    cdef double[::1] ov = out
    m.select_segments(t)
    if m.n:
        m.rhs(t, &yv[0], &fv[0] if m.nf else NULL, &ov[0])
    return out
