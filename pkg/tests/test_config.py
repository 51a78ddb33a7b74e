import textwrap

import numpy as np
import pytest

from bisim.config import config_echo, load_config, parse_config
from bisim.errors import ConfigError

MINIMAL = """
waveform:
  carrier_hz: 3.7e+9
  bandwidth_hz: 20e6
  n_subcarriers: 64
  n_symbols: 32
scene:
  tx_nodes:
    - id: tx0
      position: [0, 0, 0]
  rx_nodes:
    - id: rx0
      position: [100, 0, 0]
  targets:
    - kind: rigid
      name: blip
      scatterers:
        - amplitude: 0.05
      trajectory:
        - [0.0, [50, 40, 0]]
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


class TestLoadConfig:
    def test_minimal_scene_with_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, MINIMAL))
        assert cfg.waveform.n_subcarriers == 64
        assert cfg.scene.tx_nodes[0].node_id == "tx0"
        assert cfg.mode == "geometric"
        assert cfg.processing.stft.fft_size == 2048
        assert cfg.processing.stft.hop == 32
        assert cfg.outputs.format == "bin"
        # wavelength defaults to c/f_c
        assert cfg.scene.wavelength == pytest.approx(299792458.0 / 3.7e9)

    def test_string_numbers_accepted(self, tmp_path):
        # YAML 1.1 resolves "160e6" as a string; the loader must coerce it
        cfg = load_config(
            write(tmp_path, MINIMAL.replace("20e6", '"160e6"').replace("64", "1280"))
        )
        assert cfg.waveform.bandwidth == 160e6

    def test_paper_numerology(self, tmp_path):
        text = MINIMAL.replace("20e6", "160e6").replace(
            "n_subcarriers: 64", "n_subcarriers: 1280"
        ).replace("n_symbols: 32", "n_symbols: 2048")
        cfg = load_config(write(tmp_path, text))
        assert cfg.waveform.delta_f == 125e3
        assert cfg.waveform.t_sym == 8e-6

    def test_duplicate_node_id_named(self, tmp_path):
        text = MINIMAL.replace("id: rx0", "id: tx0")
        with pytest.raises(ConfigError, match="tx0"):
            load_config(write(tmp_path, text))

    def test_seed_required_with_noise(self, tmp_path):
        text = MINIMAL + "\nnoise:\n  snr_db: 20\n"
        with pytest.raises(ConfigError, match="seed"):
            load_config(write(tmp_path, text))

    def test_parse_error_reports_line_and_column(self, tmp_path):
        bad = "waveform:\n  carrier_hz: [unclosed\n"
        with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
            load_config(write(tmp_path, bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_missing_field_named(self, tmp_path):
        text = MINIMAL.replace("      position: [100, 0, 0]\n", "")
        with pytest.raises(ConfigError, match="rx_nodes"):
            load_config(write(tmp_path, text))

    def test_rotor_target(self, tmp_path):
        text = """
        waveform:
          carrier_hz: 3.7e+9
          bandwidth_hz: 16e6
          n_subcarriers: 128
          n_symbols: 64
        scene:
          tx_nodes: [{id: tx0, position: [0, 0, 0]}]
          rx_nodes: [{id: rx0, position: [20, 0, 0]}]
          targets:
            - kind: rotor
              name: prop
              hub: [10, 0, 0]
              radius: 0.12
              rate_rpm: 6000
              blades: 2
        flyover:
          d_tx: 10
          d_rx: 10
          band: {f_lo: 2e9, f_hi: 18e9, n_points: 128}
        """
        cfg = load_config(write(tmp_path, text))
        rotor = cfg.scene.targets[0]
        assert rotor.rate == pytest.approx(6000 * 2 * np.pi / 60)
        assert rotor.samples_per_blade == 32
        assert cfg.flyover.band.n_points == 128

    def test_unknown_target_kind(self, tmp_path):
        text = MINIMAL.replace("kind: rigid", "kind: hologram")
        with pytest.raises(ConfigError, match="hologram"):
            load_config(write(tmp_path, text))


class TestConfigEcho:
    def test_every_default_is_echoed(self, tmp_path):
        cfg = load_config(write(tmp_path, MINIMAL))
        echo = config_echo(cfg)
        assert echo["mode"] == "geometric"
        assert echo["processing"]["stft"] == {
            "fft_size": 2048,
            "hop": 32,
            "window": "gaussian",
        }
        assert echo["processing"]["clean_paths"] == 0
        assert echo["processing"]["detect_threshold_db"] == 20.0
        assert echo["noise"] == {"snr_db": None, "seed": None}
        assert echo["outputs"] == {"directory": "out", "format": "bin"}
        assert echo["waveform"]["subcarrier_spacing_hz"] == pytest.approx(20e6 / 64)
        assert echo["scene"]["include_los"] is True

    def test_echo_reparses_to_same_scene(self, tmp_path):
        cfg = load_config(write(tmp_path, MINIMAL))
        echo = config_echo(cfg)
        again = parse_config(echo)
        assert again.waveform.n_symbols == cfg.waveform.n_symbols
        assert again.scene.tx_nodes[0].node_id == "tx0"
        assert len(again.scene.targets) == 1
