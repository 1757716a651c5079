# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitmap kernels; contract documented in _fallback.py."""

from libc.math cimport ceil


def rle_encode(const unsigned char[::1] bitmap):
    cdef Py_ssize_t n = bitmap.shape[0]
    if n == 0:
        return []
    cdef list counts = []
    cdef Py_ssize_t i, run = 0
    cdef bint current = False, v
    for i in range(n):
        v = bitmap[i] != 0
        if v == current:
            run += 1
        else:
            counts.append(run)
            current = v
            run = 1
    counts.append(run)
    return counts


def rle_decode(counts, Py_ssize_t size):
    cdef bytearray out = bytearray(size)
    cdef unsigned char[::1] view = out
    cdef Py_ssize_t total = 0, i, run
    cdef bint value = False
    for item in counts:
        run = item
        if run < 0:
            raise ValueError(f"negative run length {run}")
        if value:
            if total + run > size:
                raise ValueError(f"run lengths sum past {size}")
            for i in range(total, total + run):
                view[i] = 1
        total += run
        value = not value
    if total != size:
        raise ValueError(f"run lengths sum to {total}, expected {size}")
    return bytes(out)


def count_nonzero(const unsigned char[::1] bitmap):
    cdef Py_ssize_t i, total = 0
    for i in range(bitmap.shape[0]):
        if bitmap[i] != 0:
            total += 1
    return total


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t lo, Py_ssize_t hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def count_outside_box(const unsigned char[::1] bitmap, Py_ssize_t width, Py_ssize_t height,
                      double x_min, double y_min, double x_max, double y_max):
    if bitmap.shape[0] != width * height:
        raise ValueError(f"bitmap length {bitmap.shape[0]} != {width}x{height}")
    cdef Py_ssize_t x0 = _clamp(<Py_ssize_t>ceil(x_min), 0, width)
    cdef Py_ssize_t x1 = _clamp(<Py_ssize_t>ceil(x_max), 0, width)
    cdef Py_ssize_t y0 = _clamp(<Py_ssize_t>ceil(y_min), 0, height)
    cdef Py_ssize_t y1 = _clamp(<Py_ssize_t>ceil(y_max), 0, height)
    cdef Py_ssize_t x, y, outside = 0
    for y in range(height):
        for x in range(width):
            if bitmap[y * width + x] != 0:
                if x < x0 or x >= x1 or y < y0 or y >= y1:
                    outside += 1
    return outside


def clip_to_box(const unsigned char[::1] bitmap, Py_ssize_t width, Py_ssize_t height,
                double x_min, double y_min, double x_max, double y_max):
    if bitmap.shape[0] != width * height:
        raise ValueError(f"bitmap length {bitmap.shape[0]} != {width}x{height}")
    cdef Py_ssize_t x0 = _clamp(<Py_ssize_t>ceil(x_min), 0, width)
    cdef Py_ssize_t x1 = _clamp(<Py_ssize_t>ceil(x_max), 0, width)
    cdef Py_ssize_t y0 = _clamp(<Py_ssize_t>ceil(y_min), 0, height)
    cdef Py_ssize_t y1 = _clamp(<Py_ssize_t>ceil(y_max), 0, height)
    cdef bytearray out = bytearray(width * height)
    cdef unsigned char[::1] view = out
    cdef Py_ssize_t x, y, cleared = 0
    for y in range(height):
        for x in range(width):
            if bitmap[y * width + x] != 0:
                if x < x0 or x >= x1 or y < y0 or y >= y1:
                    cleared += 1
                else:
                    view[y * width + x] = bitmap[y * width + x]
    return bytes(out), cleared
