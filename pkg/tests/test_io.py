import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvcpt.config import FORMAT_TAG
from nvcpt.fitting import FitModel, FitResult, LorentzianDip
from nvcpt.io import read_fit_dips, read_spectrum, spectrum_text, write_fit, write_spectrum
from nvcpt.spectrum import Spectrum


def test_two_point_spectrum_layout():
    s = Spectrum(np.array([1.0, 2.0]), np.array([0.5, 0.25]), metadata={"model.zfs": 2870.0})
    lines = spectrum_text(s).splitlines()
    assert lines[0] == f"# {FORMAT_TAG}"
    header = lines.index("x_mhz,signal")
    assert all(l.startswith("#") for l in lines[:header])
    assert lines[header + 1:] == ["1,0.5", "2,0.25"]
    assert "# model.zfs = 2870.0" in lines


@settings(max_examples=30)
@given(ys=st.lists(st.floats(0, 1e6, allow_subnormal=False), min_size=2, max_size=30))
def test_round_trip_nine_digits(ys):
    x = np.cumsum(np.linspace(0.1, 1.3, len(ys))) - 7.123456789
    s = Spectrum(x, np.array(ys), unit="us", axis="mw_pulse_duration")
    back = read_spectrum(io.StringIO(spectrum_text(s)))
    assert back.unit == "us" and back.axis == "mw_pulse_duration"
    assert np.allclose(back.x, x, rtol=1e-8, atol=0)
    assert np.allclose(back.y, ys, rtol=1e-8, atol=1e-300)
    # re-writing the re-read spectrum is byte identical
    assert spectrum_text(back).splitlines()[-len(ys):] == spectrum_text(s).splitlines()[-len(ys):]


def test_read_rejects_foreign_files():
    with pytest.raises(ValueError):
        read_spectrum(io.StringIO("a,b\n1,2\n"))
    with pytest.raises(ValueError):
        read_spectrum(io.StringIO(f"# {FORMAT_TAG}\nx_mhz,signal\n1,abc\n"))
    with pytest.raises(ValueError):
        read_spectrum(io.StringIO(f"# {FORMAT_TAG}\n"))


def test_fit_records_in_center_order():
    centers = [5.0, -3.0, 1.0, 9.0, -8.0, 0.5]
    model = FitModel(1.0, [LorentzianDip(c, 1.0, 0.1) for c in centers])
    result = FitResult(model, 0.123, {n: 0.01 for n in model.parameter_names()}, 7, True)
    buf = io.StringIO()
    write_fit(result, buf)
    text = buf.getvalue()
    dips = read_fit_dips(io.StringIO(text))
    assert len(dips) == 6
    assert [d["center"] for d in dips] == sorted(centers)
    assert all(set(d) == {"center", "center_err", "fwhm", "fwhm_err", "depth", "depth_err"}
               for d in dips)
    assert "baseline = 1 err=0.01" in text and "rss = 0.123" in text
