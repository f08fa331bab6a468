"""Thin wrapper around scipy.fft with a process-wide worker count.

Forward transforms are unnormalized, inverse transforms divide by the
total point count (scipy default).  Discrete convolutions multiply by
h^2 to approximate continuum integrals; that factor lives at the call
sites, not here.
"""

import scipy.fft as _sfft

_workers = 1


def set_workers(n: int) -> None:
    global _workers
    if n < 1:
        raise ValueError("worker count must be >= 1")
    _workers = int(n)


def get_workers() -> int:
    return _workers


def fft2(a):
    return _sfft.fft2(a, workers=_workers)


def ifft2(a):
    return _sfft.ifft2(a, workers=_workers)


def rfft2(a):
    return _sfft.rfft2(a, workers=_workers)


def irfft2(a, s):
    return _sfft.irfft2(a, s=s, workers=_workers)


def fftn(a, axes=None):
    return _sfft.fftn(a, axes=axes, workers=_workers)


def ifftn(a, axes=None):
    return _sfft.ifftn(a, axes=axes, workers=_workers)
