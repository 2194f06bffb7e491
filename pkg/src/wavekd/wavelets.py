"""Wavelet filter coefficient tables for the dual-tree transform.

Two fixed tables ship with the package:

* ``LEVEL1_H0`` / ``LEVEL1_G0``: a 13/19-tap symmetric biorthogonal
  analysis/synthesis lowpass pair.  Constructed by factoring a half-band
  product filter (exact PR by construction: the product has a unit center
  tap and zero even lags to double precision), with the remaining design
  freedom spent on near-orthogonality (|H0(w)|^2 + |H1(w)|^2 close to 2)
  and stopband rejection.  Both filters have exact zeros at the Nyquist
  frequency and DC gain sqrt(2).
* ``QSHIFT_14``: Kingsbury's 14-tap quarter-shift lowpass prototype
  (tree B uses it directly, tree A its time reverse).  The published
  values were Newton-refined so the even-lag autocorrelations vanish
  identically, the DC gain is exactly sqrt(2) and the Nyquist gain is
  exactly zero in double precision; the refinement moves no tap by more
  than 1.3e-7.

Alternative tables can be loaded from a plain-text file with one
coefficient per line and one ``[section]`` header per filter; see
:func:`load_filter_text`.
"""

from dataclasses import dataclass

import numpy as np

LEVEL1_H0 = np.array([
    0.00012194453002392805,
    -0.018196705678936276,
    0.03835277420285683,
    -0.026497676888927707,
    -0.10550187522899585,
    0.39824777316113774,
    0.8411610941787777,
    0.39824777316113774,
    -0.10550187522899585,
    -0.026497676888927707,
    0.03835277420285683,
    -0.018196705678936276,
    0.00012194453002392805,
])

LEVEL1_G0 = np.array([
    -2.0547378189061514e-06,
    -0.0003066103846661467,
    -0.000615190434510084,
    0.004186114778684976,
    0.011475250564372402,
    0.003541356655021151,
    -0.06152652484161622,
    -0.048917597003892935,
    0.40422191004284763,
    0.7901002530962531,
    0.40422191004284763,
    -0.048917597003892935,
    -0.06152652484161622,
    0.003541356655021151,
    0.011475250564372402,
    0.004186114778684976,
    -0.000615190434510084,
    -0.0003066103846661467,
    -2.0547378189061514e-06,
])

QSHIFT_14 = np.array([
    0.0032531314539379582,
    -0.0038832003841905408,
    0.03466023000825233,
    -0.03887268833066868,
    -0.11720401465701721,
    0.2752954831026907,
    0.7561455337234388,
    0.568810532359082,
    0.011865974004314722,
    -0.10671169218758106,
    0.0238253826882087,
    0.017025223370035213,
    -0.005439456034587826,
    -0.004556876742820081,
])


def _alternate(h, parity):
    out = np.array(h, dtype=float, copy=True)
    out[parity::2] *= -1.0
    return out


@dataclass(frozen=True)
class WaveletFilterSet:
    """Analysis/synthesis filters for the first level and the q-shift levels.

    Level-0 filters are odd-length and symmetric; the analysis highpass is
    the modulated synthesis lowpass and vice versa.  Q-shift filters are
    even-length; tree B uses the prototype, tree A its time reverse, and
    synthesis filters are the time-reversed analysis filters (the q-shift
    prototype is orthonormal).
    """

    h0: np.ndarray  # level-0 analysis lowpass
    g0: np.ndarray  # level-0 synthesis lowpass
    h1: np.ndarray  # level-0 analysis highpass
    g1: np.ndarray  # level-0 synthesis highpass
    h0a: np.ndarray  # q-shift tree-A analysis lowpass
    h0b: np.ndarray  # q-shift tree-B analysis lowpass
    h1a: np.ndarray  # q-shift tree-A analysis highpass
    h1b: np.ndarray  # q-shift tree-B analysis highpass

    @classmethod
    def from_prototypes(cls, h0=LEVEL1_H0, g0=LEVEL1_G0, qshift=QSHIFT_14):
        h0 = np.asarray(h0, dtype=float)
        g0 = np.asarray(g0, dtype=float)
        q = np.asarray(qshift, dtype=float)
        if len(h0) % 2 == 0 or len(g0) % 2 == 0:
            raise ValueError("level-0 filters must have odd length")
        if len(q) % 2 != 0:
            raise ValueError("q-shift prototype must have even length")
        h1 = _alternate(g0, 1)
        g1 = _alternate(h0, 0)
        h0b = q.copy()
        h0a = q[::-1].copy()
        odd_start = (len(q) // 2 + 1) % 2
        h1a = _alternate(q, odd_start)
        h1b = h1a[::-1].copy()
        fs = cls(h0=h0, g0=g0, h1=h1, g1=g1, h0a=h0a, h0b=h0b, h1a=h1a, h1b=h1b)
        fs.check()
        return fs

    def check(self, tol=1e-10):
        """Verify the perfect-reconstruction identities of the tables."""
        p = np.convolve(self.h0, self.g0)
        center = (len(p) - 1) // 2
        err = abs(p[center] - 1.0)
        for k in range(2, center + 1, 2):
            err = max(err, abs(p[center + k]))
        if err > tol:
            raise ValueError(f"level-0 pair violates the half-band identity (err {err:.2e})")
        q = self.h0b
        for k in range(0, len(q) - 1, 2):
            v = np.dot(q[: len(q) - k], q[k:]) - (1.0 if k == 0 else 0.0)
            err = max(err, abs(v))
        if err > tol:
            raise ValueError(f"q-shift prototype violates orthonormality (err {err:.2e})")
        if not np.allclose(self.h0a, self.h0b[::-1], rtol=0, atol=0):
            raise ValueError("tree-A lowpass must be the time-reversed tree-B lowpass")
        return err


def load_filter_text(path):
    """Read filter sections from a plain text file.

    Format: a ``[name]`` line opens a section; each following non-blank,
    non-comment line holds one coefficient.  Returns ``{name: ndarray}``.
    """
    sections = {}
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections[current] = []
                continue
            if current is None:
                raise ValueError(f"coefficient before any [section] header: {line!r}")
            sections[current].append(float(line))
    return {k: np.array(v, dtype=float) for k, v in sections.items()}


def filter_set_from_text(path):
    """Build a :class:`WaveletFilterSet` from a text file with sections
    ``level0_lowpass_analysis``, ``level0_lowpass_synthesis`` and ``qshift``."""
    sec = load_filter_text(path)
    try:
        return WaveletFilterSet.from_prototypes(
            h0=sec["level0_lowpass_analysis"],
            g0=sec["level0_lowpass_synthesis"],
            qshift=sec["qshift"],
        )
    except KeyError as exc:
        raise ValueError(f"missing filter section {exc.args[0]!r} in {path}") from exc


DEFAULT_FILTERS = WaveletFilterSet.from_prototypes()
