import numpy as np
import pytest

from eegbench import edf


def make_specs(n_signals=2, samples_per_record=100, phys=(-204.8, 204.7),
               dig=(-2048, 2047), labels=None):
    labels = labels or [f"C{i + 3}" for i in range(n_signals)]
    return [
        edf.SignalSpec(label=labels[i], transducer="AgAgCl electrode", unit="uV",
                       phys_min=phys[0], phys_max=phys[1],
                       dig_min=dig[0], dig_max=dig[1],
                       prefilter="", samples_per_record=samples_per_record)
        for i in range(n_signals)
    ]


def make_edf_bytes(digital, specs=None, n_records=None, record_duration_s=1.0,
                   subject="subj1", samples_per_record=100):
    """Serialize a (signals x samples) int array into EDF bytes via write_edf."""
    digital = np.asarray(digital)
    specs = specs or make_specs(n_signals=digital.shape[0],
                                samples_per_record=samples_per_record)
    if n_records is None:
        n_records = digital.shape[1] // specs[0].samples_per_record
    fs = specs[0].samples_per_record / record_duration_s
    phys = np.array([s.phys_min + (row - s.dig_min) * s.gain
                     for s, row in zip(specs, digital)])
    from fractions import Fraction
    rec = edf.Recording(subject, [s.label for s in specs],
                        Fraction(fs).limit_denominator(), phys)
    header = edf.make_header(specs, n_records, record_duration_s, patient_id=subject)
    return edf.write_edf(header, specs, rec)


@pytest.fixture
def fixture_2x1000():
    rng = np.random.default_rng(42)
    digital = rng.integers(-2048, 2048, size=(2, 1000))
    return digital, make_edf_bytes(digital)
