import pytest
from hypothesis import given
from hypothesis import strategies as st

from workbench.errors import InvalidConfig, ParseError
from workbench.sparkconfig import (
    SparkSessionConfig,
    default_config,
    parse_config_yml,
    render_config_yml,
    size_to_mib,
)

CANONICAL = (
    "default:\n"
    '  livy.url: "http://livy.example:8998"\n'
    '  method: "hopsworks"\n'
    '  driverMemory: "2g"\n'
    "  driverCores: 1\n"
    '  executorMemory: "4g"\n'
    "  executorCores: 2\n"
    "  numExecutors: 2\n"
)


def example_config() -> SparkSessionConfig:
    return SparkSessionConfig(
        livy_url="http://livy.example:8998",
        method="hopsworks",
        driver_memory="2g",
        driver_cores=1,
        executor_memory="4g",
        executor_cores=2,
        num_executors=2,
    )


valid_configs = st.builds(
    SparkSessionConfig,
    livy_url=st.from_regex(r"http://[a-z0-9.\-]{1,20}:[0-9]{2,5}", fullmatch=True),
    method=st.just("hopsworks"),
    driver_memory=st.from_regex(r"[1-9][0-9]{0,3}(m|g)", fullmatch=True),
    driver_cores=st.integers(min_value=1, max_value=64),
    executor_memory=st.from_regex(r"[1-9][0-9]{0,3}(m|g)", fullmatch=True),
    executor_cores=st.integers(min_value=1, max_value=64),
    num_executors=st.integers(min_value=1, max_value=500),
)


class TestRender:
    def test_canonical_document(self):
        assert render_config_yml(example_config()) == CANONICAL

    def test_eight_lines(self):
        assert len(render_config_yml(example_config()).splitlines()) == 8

    def test_byte_identical_across_calls(self):
        cfg = example_config()
        assert render_config_yml(cfg) == render_config_yml(cfg)

    def test_zero_driver_cores_rejected(self):
        cfg = SparkSessionConfig(
            "http://x:1", "hopsworks", "2g", 0, "4g", 2, 2
        )
        with pytest.raises(InvalidConfig):
            render_config_yml(cfg)

    @pytest.mark.parametrize("size", ["2G", "g2", "2", "0x2g", "2gb", ""])
    def test_bad_size_strings(self, size):
        cfg = SparkSessionConfig("http://x:1", "hopsworks", size, 1, "4g", 2, 2)
        with pytest.raises(InvalidConfig):
            render_config_yml(cfg)


class TestParse:
    def test_round_trip(self):
        cfg = example_config()
        assert parse_config_yml(render_config_yml(cfg)) == cfg

    def test_key_reordering_tolerated(self):
        text = (
            "default:\n"
            "  numExecutors: 2\n"
            '  executorMemory: "4g"\n'
            '  livy.url: "http://livy.example:8998"\n'
            "  executorCores: 2\n"
            '  driverMemory: "2g"\n'
            '  method: "hopsworks"\n'
            "  driverCores: 1\n"
        )
        assert parse_config_yml(text) == example_config()

    def test_extra_whitespace_tolerated(self):
        text = (
            "\ndefault:\n\n"
            '     livy.url:    "http://livy.example:8998"  \n'
            '  method: "hopsworks"\n'
            '\t driverMemory: "2g"\n'
            "  driverCores:  1\n"
            '  executorMemory: "4g"\n'
            "  executorCores: 2\n"
            "  numExecutors: 2\n\n"
        )
        assert parse_config_yml(text) == example_config()

    def test_missing_field_names_it(self):
        text = CANONICAL.replace("  numExecutors: 2\n", "")
        with pytest.raises(InvalidConfig, match="numExecutors"):
            parse_config_yml(text)

    def test_unknown_key_suggests_nearest(self):
        # Oracle (Levenshtein over the key set): nearest to "driverMem" is
        # "driverMemory" at distance 3; no other key is closer.
        text = CANONICAL.replace("driverMemory", "driverMem")
        with pytest.raises(ParseError, match="driverMemory") as excinfo:
            parse_config_yml(text)
        assert excinfo.value.line == 4

    def test_parse_error_carries_line_number(self):
        text = CANONICAL + "  bogusKey: 9\n"
        with pytest.raises(ParseError) as excinfo:
            parse_config_yml(text)
        assert excinfo.value.line == 9

    def test_duplicate_key(self):
        text = CANONICAL + "  driverCores: 3\n"
        with pytest.raises(ParseError, match="duplicate"):
            parse_config_yml(text)

    def test_missing_header(self):
        with pytest.raises(ParseError):
            parse_config_yml('  driverMemory: "2g"\n')

    def test_non_integer_count(self):
        text = CANONICAL.replace("driverCores: 1", "driverCores: one")
        with pytest.raises(ParseError, match="integer"):
            parse_config_yml(text)

    @given(valid_configs)
    def test_round_trip_property(self, cfg):
        assert parse_config_yml(render_config_yml(cfg)) == cfg


class TestHelpers:
    def test_size_to_mib(self):
        assert size_to_mib("2g") == 2048
        assert size_to_mib("512m") == 512

    def test_default_config_is_valid(self):
        default_config("http://127.0.0.1:8998").validate()

    def test_from_dict_missing_field(self):
        with pytest.raises(InvalidConfig, match="numExecutors"):
            SparkSessionConfig.from_dict(
                {"driverMemory": "2g", "driverCores": 1, "executorMemory": "4g", "executorCores": 2},
                livy_url="http://x:1",
            )
