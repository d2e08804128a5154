"""Pure-Python integration kernel.

Mirrors ``_ckernel.pyx`` line for line; used when the compiled extension is
unavailable or when NANOSNN_PURE=1 is set.
"""

import math

import numpy as np

from .circuit import neuron_derivs, synapse_derivs

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)
# dense output coefficients (Hairer/Shampine)
D1, D3, D4, D5, D6, D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                          -10690763975 / 1880347072, 701980252875 / 199316789632,
                          -1453857185 / 822651844, 69997945 / 29380423)

NAME = "python"
EPS = 1e-9  # uA; switching slack for states sitting on a located crossing
ROOT_ITERS = 40
OK, DIVERGED, CHATTER = 0, 1, 2


class _Model:
    def __init__(self, a):
        self.N = a["N"]
        self.S = a["S"]
        self.nrows = [list(r) for r in a["nrows"]]
        self.srows = [list(r) for r in a["srows"]]
        self.src = [int(v) for v in a["src"]]
        self.tgt = [int(v) for v in a["tgt"]]
        self.doff = [int(v) for v in a["doff"]]
        self.dt = list(a["dt"])
        self.dv = list(a["dv"])
        self.tail = list(a["dtail"])
        self.form = int(a["form"])
        self.n = 4 * self.N + 5 * self.S
        self.nf = 2 * self.N + self.S
        self.seg_t = [0.0] * self.N
        self.seg_v = [0.0] * self.N
        self.seg_s = [0.0] * self.N

    def select_segments(self, tref):
        for k in range(self.N):
            a, b = self.doff[k], self.doff[k + 1]
            ts, vs = self.dt, self.dv
            if tref < ts[a]:
                self.seg_t[k], self.seg_v[k], self.seg_s[k] = ts[a], vs[a], 0.0
                continue
            j = a
            while j + 1 < b and ts[j + 1] <= tref:
                j += 1
            s = self.tail[k] if j == b - 1 else (vs[j + 1] - vs[j]) / (ts[j + 1] - ts[j])
            self.seg_t[k], self.seg_v[k], self.seg_s[k] = ts[j], vs[j], s

    def rhs(self, t, y, fl):
        N = self.N
        iin = [self.seg_v[k] + self.seg_s[k] * (t - self.seg_t[k]) for k in range(N)]
        din = list(self.seg_s)
        dy = [0.0] * self.n
        base = 4 * N
        for s in range(self.S):
            o = base + 5 * s
            d = synapse_derivs(y[o], y[o + 1], y[o + 2], y[o + 3], y[o + 4],
                               fl[2 * N + s], self.srows[s])
            dy[o:o + 5] = d
            k = self.tgt[s]
            iin[k] += y[o + 4]
            din[k] += d[4]
        for k in range(N):
            o = 4 * k
            dy[o:o + 4] = neuron_derivs(y[o], y[o + 1], y[o + 2], y[o + 3],
                                        fl[2 * k], fl[2 * k + 1], self.nrows[k],
                                        iin[k], din[k], self.form)
        return dy

    # switching ---------------------------------------------------------
    def crossing(self, y, fl):
        """Largest crossing margin over all flags (> 0 means a switch is due)."""
        best = -math.inf
        N = self.N
        for k in range(N):
            r = self.nrows[k]
            for j, (i, ic, ir) in enumerate(((y[4 * k], r[1], r[2]),
                                             (y[4 * k + 2], r[5], r[6]))):
                g = abs(i) - ic if fl[2 * k + j] == 0 else ir - abs(i)
                if g > best:
                    best = g
        for s in range(self.S):
            if fl[2 * self.src[s] + 1]:
                continue
            r = self.srows[s]
            i = y[4 * N + 5 * s]
            g = abs(i) - r[1] if fl[2 * N + s] == 0 else r[2] - abs(i)
            if g > best:
                best = g
        return best

    def root_fraction(self, ylo, yhi, fl):
        """Linear estimate, within a bracket, of the earliest crossing."""
        glo = self.margins(ylo, fl)
        ghi = self.margins(yhi, fl)
        best = 1.0
        for a, b in zip(glo, ghi):
            if b > 0:
                f = a / (a - b) if a < 0 else 0.0
                if f < best:
                    best = f
        return best

    def margins(self, y, fl):
        out = []
        N = self.N
        for k in range(N):
            r = self.nrows[k]
            for j, (i, ic, ir) in enumerate(((y[4 * k], r[1], r[2]),
                                             (y[4 * k + 2], r[5], r[6]))):
                out.append(abs(i) - ic if fl[2 * k + j] == 0 else ir - abs(i))
        for s in range(self.S):
            if fl[2 * self.src[s] + 1]:
                out.append(-math.inf)
                continue
            r = self.srows[s]
            i = y[4 * N + 5 * s]
            out.append(abs(i) - r[1] if fl[2 * N + s] == 0 else r[2] - abs(i))
        return out

    def transitions(self, y, fl, out, eps=0.0):
        """Apply the switching rules in index order until nothing changes;
        append (flag index, new value) pairs to `out`.  `eps` widens the
        thresholds for a state placed exactly on a located crossing."""
        N = self.N
        for _ in range(8):
            changed = False
            for k in range(N):
                r = self.nrows[k]
                for j, (i, ic, ir) in enumerate(((y[4 * k], r[1], r[2]),
                                                 (y[4 * k + 2], r[5], r[6]))):
                    f = 2 * k + j
                    a = abs(i)
                    if fl[f] == 0 and a > ic - eps:
                        fl[f] = 1
                    elif fl[f] == 1 and a < ir + eps:
                        fl[f] = 0
                    else:
                        continue
                    out.append((f, fl[f]))
                    changed = True
            for s in range(self.S):
                f = 2 * N + s
                r = self.srows[s]
                a = abs(y[4 * N + 5 * s])
                if fl[2 * self.src[s] + 1]:
                    new = 1
                elif fl[f] == 0 and a > r[1] - eps:
                    new = 1
                elif fl[f] == 1 and a < r[2] + eps:
                    new = 0
                else:
                    new = fl[f]
                if new != fl[f]:
                    fl[f] = new
                    out.append((f, new))
                    changed = True
            if not changed:
                return


class _Recorder:
    def __init__(self, record_dt):
        self.record_dt = record_dt
        self.t_last = -math.inf
        self.times, self.states, self.flags = [], [], []
        self.ev_t, self.ev_f, self.ev_v = [], [], []

    def sample(self, t, y, fl, force=False):
        if force or self.record_dt <= 0 or t >= self.t_last + self.record_dt:
            if self.times and t <= self.times[-1]:
                # same instant: keep the latest state only
                self.times.pop()
                self.states.pop()
                self.flags.pop()
            self.times.append(t)
            self.states.append(list(y))
            self.flags.append(list(fl))
            self.t_last = t

    def events(self, t, changes):
        for f, v in changes:
            self.ev_t.append(t)
            self.ev_f.append(f)
            self.ev_v.append(v)

    def result(self, n, nf, status, info, t_last):
        return {
            "times": np.array(self.times, float),
            "states": np.array(self.states, float).reshape(len(self.times), n),
            "flags": np.array(self.flags, np.int8).reshape(len(self.times), nf),
            "ev_t": np.array(self.ev_t, float),
            "ev_f": np.array(self.ev_f, np.int32),
            "ev_v": np.array(self.ev_v, np.int8),
            "status": status, "info": info, "t_last": t_last,
        }


class _Noise:
    def __init__(self, sigma, rng):
        self.sigma = sigma
        self.rng = rng
        self.buf = []
        self.pos = 0

    def draw(self):
        if self.pos >= len(self.buf):
            self.buf = self.rng.standard_normal(4096).tolist()
            self.pos = 0
        z = self.buf[self.pos]
        self.pos += 1
        return self.sigma * z

    def apply(self, m, y):
        for k in range(m.N):
            for o in (4 * k, 4 * k + 2):
                e = self.draw()
                y[o] += e
                y[o + 1] -= e
        for s in range(m.S):
            o = 4 * m.N + 5 * s
            e = self.draw()
            y[o] += e
            y[o + 1] -= e


class _Chatter:
    def __init__(self, cap, window):
        self.cap = cap
        self.window = window
        self.times = []

    def hit(self, t, n):
        self.times.extend([t] * n)
        lo = t - self.window
        while self.times and self.times[0] < lo:
            self.times.pop(0)
        return len(self.times) > self.cap


def integrate(a, y0, fl0, opts, rng=None):
    m = _Model(a)
    y = [float(v) for v in y0]
    fl = [int(v) for v in fl0]
    t_end = opts["t_end"]
    rec = _Recorder(opts["record_dt"])
    noise = _Noise(opts["noise_sigma"], rng) if opts["noise_sigma"] > 0 else None
    chat = _Chatter(opts["event_cap"], opts["chatter_window"])
    bps = [b for b in a["breakpoints"] if 0 < b < t_end] + [t_end]
    ib = 0

    t = 0.0
    ch = []
    m.transitions(y, fl, ch)
    rec.events(t, ch)
    rec.sample(t, y, fl, force=True)
    if opts["method"] == 1:
        return _euler(m, y, fl, opts, rec, noise, chat, bps)

    n = m.n
    rtol, atol = opts["rtol"], opts["atol"]
    dt_max, dt_event = opts["dt_max"], opts["dt_event"]
    h = opts["dt_init"]
    h_reset = opts["dt_init"]
    k1 = None
    while t < t_end:
        while ib < len(bps) and bps[ib] <= t:
            ib += 1
        t_next_bp = bps[ib] if ib < len(bps) else t_end
        hit_bp = False
        if h >= dt_max:
            h = dt_max
        if t + h >= t_next_bp:
            h = t_next_bp - t
            hit_bp = True
        m.select_segments(t + 0.5 * h)
        if k1 is None:
            k1 = m.rhs(t, y, fl)
        r = range(n)
        yt = [y[i] + h * A21 * k1[i] for i in r]
        k2 = m.rhs(t + C2 * h, yt, fl)
        yt = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in r]
        k3 = m.rhs(t + C3 * h, yt, fl)
        yt = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in r]
        k4 = m.rhs(t + C4 * h, yt, fl)
        yt = [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in r]
        k5 = m.rhs(t + C5 * h, yt, fl)
        yt = [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                          + A65 * k5[i]) for i in r]
        k6 = m.rhs(t + h, yt, fl)
        y5 = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
              for i in r]
        k7 = m.rhs(t + h, y5, fl)
        acc = 0.0
        for i in r:
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                     + E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(y5[i]))
            acc += (e / sc) ** 2
        err = math.sqrt(acc / n) if n else 0.0
        if not math.isfinite(err):
            err = 1e10
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14:
                return rec.result(n, m.nf, DIVERGED, -1, t)
            hit_bp = False
            continue
        # accepted step: look for a switching instant inside it
        event = m.crossing(y5, fl) > 0
        if event:
            ks = (k1, k3, k4, k5, k6, k7)

            def dense(th):
                return _dense(y, y5, ks, h, th, n)

            lo, hi = 0.0, 1.0
            ylo, yhi = y, y5
            while (hi - lo) * h > dt_event:
                mid = 0.5 * (lo + hi)
                ym = dense(mid)
                if m.crossing(ym, fl) > 0:
                    hi, yhi = mid, ym
                else:
                    lo, ylo = mid, ym
            # regula falsi inside the bracket, bisecting whenever the same
            # end moves twice in a row
            side = 0
            for _ in range(ROOT_ITERS):
                if abs(side) == 2:
                    th = 0.5 * (lo + hi)
                else:
                    th = lo + (hi - lo) * m.root_fraction(ylo, yhi, fl)
                y_new = dense(th)
                c = m.crossing(y_new, fl)
                if -EPS < c <= EPS:
                    break
                if c > 0:
                    hi, yhi = th, y_new
                    side = side + 1 if side > 0 else 1
                else:
                    lo, ylo = th, y_new
                    side = side - 1 if side < 0 else -1
            else:
                th, y_new = hi, yhi
            t_new = t + th * h
            hit_bp = hit_bp and th == 1.0
        else:
            t_new = t + h
            y_new = y5
        if hit_bp:
            t_new = t_next_bp
        if not all(math.isfinite(v) for v in y_new):
            return rec.result(n, m.nf, DIVERGED, -1, t)
        t, y = t_new, y_new
        ch = []
        if event:
            m.transitions(y, fl, ch, EPS)
        if noise is not None:
            noise.apply(m, y)
            m.transitions(y, fl, ch)
        if ch:
            rec.events(t, ch)
            if chat.hit(t, len(ch)):
                return rec.result(n, m.nf, CHATTER, ch[-1][0], t)
        rec.sample(t, y, fl, force=bool(ch) or t >= t_end)
        fac = min(5.0, max(0.2, 0.9 * err ** -0.2)) if err > 0 else 5.0
        h = h * fac
        if ch:
            h = min(h, h_reset)
        k1 = k7 if not (ch or hit_bp or noise is not None) else None
    return rec.result(n, m.nf, OK, -1, t)


def _dense(y, y5, ks, h, th, n):
    k1, k3, k4, k5, k6, k7 = ks
    th1 = 1.0 - th
    out = [0.0] * n
    for i in range(n):
        dy = y5[i] - y[i]
        bspl = h * k1[i] - dy
        q = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                 + D7 * k7[i])
        out[i] = y[i] + th * (dy + th1 * (bspl + th * (dy - h * k7[i] - bspl + th1 * q)))
    return out


def _euler(m, y, fl, opts, rec, noise, chat, bps):
    t = 0.0
    t_end = opts["t_end"]
    dt = opts["dt_fixed"]
    n = m.n
    ib = 0
    while t < t_end:
        while ib < len(bps) and bps[ib] <= t + 1e-12:
            ib += 1
        tb = bps[ib] if ib < len(bps) else t_end
        h = dt
        if t + h > tb - 1e-12:
            h = tb - t
        t_new = tb if h != dt else t + h
        m.select_segments(t + 0.5 * h)
        # a crossing inside the step is placed by linear interpolation and
        # the rest of the step continues with the new flags
        for _ in range(16):
            d = m.rhs(t, y, fl)
            yn = [y[i] + h * d[i] for i in range(n)]
            if not all(math.isfinite(v) for v in yn):
                return rec.result(n, m.nf, DIVERGED, -1, t)
            if m.crossing(yn, fl) <= 0:
                y = yn
                break
            f = m.root_fraction(y, yn, fl)
            y = [y[i] + f * (yn[i] - y[i]) for i in range(n)]
            t += f * h
            h -= f * h
            ch = []
            m.transitions(y, fl, ch, EPS)
            if ch:
                rec.events(t, ch)
                if chat.hit(t, len(ch)):
                    return rec.result(n, m.nf, CHATTER, ch[-1][0], t)
                rec.sample(t, y, fl, force=True)
            if h <= 1e-15:
                break
        t = t_new
        ch = []
        if noise is not None:
            noise.apply(m, y)
            m.transitions(y, fl, ch)
        if ch:
            rec.events(t, ch)
            if chat.hit(t, len(ch)):
                return rec.result(n, m.nf, CHATTER, ch[-1][0], t)
        rec.sample(t, y, fl, force=bool(ch) or t >= t_end)
    return rec.result(n, m.nf, OK, -1, t)


def rhs(a, t, y, fl):
    """Single right-hand-side evaluation, exposed for cross-checks."""
    m = _Model(a)
    m.select_segments(t)
    return np.array(m.rhs(t, [float(v) for v in y], [int(v) for v in fl]))
