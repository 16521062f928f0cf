import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtp.codec import Mode, Stage, TextStage
from qtp.errors import ConfigError
from qtp.pipeline import make_link, parse_channel_spec, post_decode, run_unit, transmit_text
from qtp.qcore import ChannelKind
from qtp.wlrm import Dictionary

DICT = Dictionary.from_words(["the", "cat", "sat", "on", "mat"])


class TestLinks:
    def test_parse(self):
        assert parse_channel_spec("depolarizing:0.2") == (ChannelKind.DEPOLARIZING, 0.2)
        with pytest.raises(ConfigError):
            parse_channel_spec("bit_flip")
        with pytest.raises(ConfigError):
            parse_channel_spec("warp:0.1")

    def test_bit_flip_in_every_mode(self):
        assert make_link("classical", "bit_flip", 0.1).channel is None
        assert make_link("qubit", "bit_flip", 0.1).channel.d == 2
        q4 = make_link("qudit4", "bit_flip", 0.1)
        assert q4.kind is ChannelKind.QUDIT_BIT_FLIP and q4.channel.d == 4

    @pytest.mark.parametrize("mode,kind", [("classical", "depolarizing"), ("qudit4", "phase_flip"), ("qubit", "qudit_bit_flip")])
    def test_unsupported(self, mode, kind):
        with pytest.raises(ConfigError):
            make_link(mode, kind, 0.1)


class TestTransmit:
    @pytest.mark.parametrize("mode", list(Mode))
    def test_noiseless(self, mode):
        t = TextStage.from_string("the cat sat")
        tx = transmit_text(t, make_link(mode, "bit_flip", 0.0), np.random.default_rng(0))
        assert tx.received.text == t.text
        assert tx.channel_uses == 8 * len(t.text) // mode.bits_per_use

    def test_full_qubit_flip(self):
        t = TextStage.from_string("cat")
        tx = transmit_text(t, make_link("qubit", "bit_flip", 1.0), np.random.default_rng(0))
        assert tx.received.text == "".join(chr(ord(c) ^ 0x55) for c in "cat")

    def test_full_classical_flip(self):
        tx = transmit_text(TextStage.from_string("a"), make_link("classical", "bit_flip", 1.0), np.random.default_rng(0))
        assert tx.received.text == chr(ord("a") ^ 0xFF)

    @given(st.lists(st.sampled_from(["the", "cat", "sat", "on", "mat"]), min_size=1, max_size=10), st.integers(0, 99))
    @settings(max_examples=30, deadline=None)
    def test_stage_word_counts_agree(self, words, seed):
        t = TextStage.from_words(words)
        rec = run_unit(t, make_link("qubit", "depolarizing", 0.3), np.random.default_rng(seed), DICT)
        assert len(rec.ideal) == len(rec.received) == len(rec.repaired) == len(rec.fused)
        assert rec.fused.stage is Stage.FUSED


class TestPostDecode:
    def test_wlrm_only(self):
        t_w, t_c, conf, t_e = post_decode(TextStage.from_string("the cau", Stage.RECEIVED), DICT)
        assert t_w.text == "the cat" and t_c is None and conf is None and t_e.words == t_w.words

    def test_with_model(self):
        from qtp.slrm.model import ModelConfig, init_params

        cfg = ModelConfig.from_words(DICT.words, d_model=8, heads=2, num_blocks=1)
        params = init_params(cfg, np.random.default_rng(0))
        t_w, t_c, conf, t_e = post_decode(TextStage.from_string("the cau sat", Stage.RECEIVED), DICT, (params, cfg))
        assert len(t_c) == 3 and conf.shape == (3,)
        for i, c in enumerate(conf):
            assert t_e.words[i] == (t_c.words[i] if c >= 0.5 else t_w.words[i])
