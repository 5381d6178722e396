import wave as stdlib_wave

import numpy as np
import pytest

from catos.audio import (DEFAULT_STIMULI, AudioBuffer, AudioError,
                         AudioParams, MicMixdown, OnsetStream, StimulusSpec,
                         WavFormatError, WavTruncatedError,
                         WavUnsupportedError, classify_onset, synth_stimulus,
                         validate_stimuli, wav_read, wav_write)


def test_synth_sample_count_and_peak():
    buf = synth_stimulus(StimulusSpec(0, 440.0, 1000), 16000)
    assert buf.samples.size == 16000
    peak = int(np.abs(buf.samples.astype(np.int32)).max())
    assert abs(peak - 16383) <= 2  # 0.5 of full scale


def test_synth_fade_ramps():
    buf = synth_stimulus(StimulusSpec(0, 440.0, 500), 16000, fade_ms=10)
    first = np.abs(buf.samples[:160].astype(np.int32))
    last = np.abs(buf.samples[-160:].astype(np.int32))
    mid = np.abs(buf.samples[4000:4160].astype(np.int32))
    assert first.max() < mid.max()
    assert last.max() < mid.max()


def test_synth_zero_duration_rejected():
    with pytest.raises(AudioError):
        synth_stimulus(StimulusSpec(0, 440.0, 0), 16000)


def test_synth_aliasing_rejected():
    with pytest.raises(AudioError):
        synth_stimulus(StimulusSpec(0, 9000.0, 100), 16000)


def test_synth_deterministic():
    a = synth_stimulus(StimulusSpec(1, 660.0, 500), 16000)
    b = synth_stimulus(StimulusSpec(1, 660.0, 500), 16000)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_validate_stimuli_rejects_duplicates():
    with pytest.raises(AudioError):
        validate_stimuli((StimulusSpec(0, 440, 500), StimulusSpec(0, 660, 500)))
    with pytest.raises(AudioError):
        validate_stimuli((StimulusSpec(0, 440, 500), StimulusSpec(1, 440, 500)))


# -- WAV ----------------------------------------------------------------------

def test_wav_empty_buffer_is_44_byte_header(tmp_path):
    path = tmp_path / "empty.wav"
    wav_write(AudioBuffer(16000, np.empty(0, np.int16)), path)
    assert path.stat().st_size == 44


def test_wav_roundtrip_random_buffers(tmp_path):
    rng = np.random.default_rng(17)
    for i in range(20):
        n = int(rng.integers(0, 5000))
        samples = rng.integers(-32768, 32768, size=n).astype(np.int16)
        rate = int(rng.choice([8000, 16000, 44100]))
        path = tmp_path / f"rt{i}.wav"
        wav_write(AudioBuffer(rate, samples), path)
        back = wav_read(path)
        assert back.sample_rate == rate
        np.testing.assert_array_equal(back.samples, samples)


def test_wav_readable_by_stdlib_parser(tmp_path):
    buf = synth_stimulus(StimulusSpec(2, 880.0, 250), 16000)
    path = tmp_path / "x.wav"
    wav_write(buf, path)
    with stdlib_wave.open(str(path)) as wf:
        assert wf.getnchannels() == 1
        assert wf.getsampwidth() == 2
        assert wf.getframerate() == 16000
        assert wf.getnframes() == buf.samples.size
        raw = wf.readframes(wf.getnframes())
    np.testing.assert_array_equal(np.frombuffer(raw, "<i2"), buf.samples)


def test_wav_malformed_magic(tmp_path):
    path = tmp_path / "bad.wav"
    wav_write(AudioBuffer(16000, np.zeros(100, np.int16)), path)
    data = bytearray(path.read_bytes())
    data[0:4] = b"JUNK"
    path.write_bytes(bytes(data))
    with pytest.raises(WavFormatError):
        wav_read(path)


def test_wav_non_pcm_rejected(tmp_path):
    path = tmp_path / "float.wav"
    wav_write(AudioBuffer(16000, np.zeros(100, np.int16)), path)
    data = bytearray(path.read_bytes())
    data[20:22] = (3).to_bytes(2, "little")  # IEEE float format tag
    path.write_bytes(bytes(data))
    with pytest.raises(WavUnsupportedError):
        wav_read(path)


def test_wav_truncated_data(tmp_path):
    path = tmp_path / "short.wav"
    wav_write(AudioBuffer(16000, np.zeros(100, np.int16)), path)
    path.write_bytes(path.read_bytes()[:-50])
    with pytest.raises(WavTruncatedError):
        wav_read(path)


# -- onset detection / classification ------------------------------------------

def silence(ms, rate=16000):
    return np.zeros(ms * rate // 1000, np.int16)


def test_classify_silence_returns_none():
    buf = AudioBuffer(16000, silence(2000))
    assert classify_onset(buf, DEFAULT_STIMULI) is None


@pytest.mark.parametrize("sid", [0, 1, 2])
def test_classify_injected_stimulus(sid):
    spec = DEFAULT_STIMULI[sid]
    stim = synth_stimulus(spec, 16000)
    samples = np.concatenate([silence(2000), stim.samples, silence(500)])
    result = classify_onset(AudioBuffer(16000, samples), DEFAULT_STIMULI)
    assert result is not None
    got_sid, t_onset, confidence = result
    assert got_sid == sid
    assert abs(t_onset - 2000) <= 10  # within one analysis window
    assert confidence > 0.9


def test_classify_with_noise_snr20():
    # threshold raised above the noise floor (noise RMS ~ -29 dBFS here)
    params = AudioParams(rms_threshold_dbfs=-26.0)
    rng = np.random.default_rng(55)
    for sid in (0, 1, 2):
        stim = synth_stimulus(DEFAULT_STIMULI[sid], 16000)
        samples = np.concatenate([silence(1000), stim.samples, silence(500)])
        signal_rms = np.sqrt(np.mean(stim.samples.astype(np.float64) ** 2))
        noise = rng.normal(0, signal_rms / 10.0, samples.size)  # 20 dB SNR
        noisy = np.clip(samples + noise, -32768, 32767).astype(np.int16)
        result = classify_onset(AudioBuffer(16000, noisy), DEFAULT_STIMULI,
                                params)
        assert result is not None and result[0] == sid
        assert abs(result[1] - 1000) <= 10


def test_classify_equal_mix_low_confidence():
    rate = 16000
    t = np.arange(rate) / rate
    mix = sum(np.sin(2 * np.pi * f * t) for f in (440.0, 660.0, 880.0))
    samples = np.clip(mix / 3 * 16383, -32768, 32767).astype(np.int16)
    result = classify_onset(AudioBuffer(rate, samples), DEFAULT_STIMULI)
    assert result is not None
    _, _, confidence = result
    assert confidence <= 0.36


def test_onset_stream_detects_across_block_boundary():
    params = AudioParams()
    stream = OnsetStream(params, DEFAULT_STIMULI)
    stim = synth_stimulus(DEFAULT_STIMULI[1], 16000)
    full = np.concatenate([silence(700), stim.samples, silence(800)])
    results = []
    for off in range(0, full.size, 16000):
        results.extend(stream.feed(full[off:off + 16000],
                                   t_start_ms=off * 1000 // 16000))
    results.extend(stream.feed(np.empty(0, np.int16), flush=True))
    assert len(results) == 1
    assert results[0].stimulus_id == 1
    assert abs(results[0].t_onset_ms - 700) <= 10


def test_onset_stream_one_result_per_burst():
    params = AudioParams()
    stream = OnsetStream(params, DEFAULT_STIMULI)
    stim = synth_stimulus(DEFAULT_STIMULI[0], 16000)
    full = np.concatenate([silence(500), stim.samples, silence(1000),
                           stim.samples, silence(500)])
    results = stream.feed(full, t_start_ms=0, flush=True)
    assert len(results) == 2


def test_mixdown_places_playback_at_offset():
    params = AudioParams()
    mix = MicMixdown(params, seed=0)
    stim = synth_stimulus(DEFAULT_STIMULI[0], 16000)
    mix.add_playback(1500, stim)
    b1 = mix.block(0, 1000)
    assert not b1.any()
    b2 = mix.block(1000, 2000)
    assert not b2[:8000].any()
    np.testing.assert_array_equal(b2[8000:], stim.samples[:8000])


def test_mixdown_noise_is_bounded_and_seeded():
    params = AudioParams(mic_noise_amp=5)
    a = MicMixdown(params, seed=3).block(0, 1000)
    b = MicMixdown(params, seed=3).block(0, 1000)
    np.testing.assert_array_equal(a, b)
    assert np.abs(a).max() <= 5
