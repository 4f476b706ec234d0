"""LLM mining: parsing, fixture mode, online mode with archived replay."""

import json
from importlib import resources
from pathlib import Path

import pytest

from rahp import MiningRequest, mine_region_descriptions, mine_super_names
from rahp.errors import (
    EndpointUnreachable,
    MissingFixture,
    UnparseableResponse,
)
from rahp.mining import (
    KIND_NAMES,
    KIND_REGION,
    parse_region_descriptions,
    region_mining_prompt,
    super_name_prompt,
)

FIXTURES = Path(str(resources.files("rahp.fixtures") / "mining"))


class TestPromptText:
    def test_region_prompt_mentions_triplet(self):
        p = region_mining_prompt("human", "holding", "wild animal")
        assert "[human] [holding] [wild animal]" in p
        assert "Here are two examples" in p
        # Both worked examples are embedded verbatim.
        assert "human hand(s) securely gripping the animal" in p
        assert "Human's buttocks are making contact with the seat" in p

    def test_names_prompt_lists_members(self):
        p = super_name_prompt(["car", "bus", "truck"])
        assert "car, bus, truck" in p
        assert "superclass category name" in p
        assert "one to three words" in p


class TestParsing:
    def test_clean_list(self):
        raw = 'Region Descriptions :\n["a b", "c d", "e"]'
        assert parse_region_descriptions(raw) == ["a b", "c d", "e"]

    def test_takes_last_marker_block(self):
        raw = ('Region Descriptions :\n["example from the prompt"]\n'
               'Region Descriptions :\n["the real answer"]')
        assert parse_region_descriptions(raw) == ["the real answer"]

    def test_tolerates_marker_typo(self):
        raw = 'Region Rescriptions :\n["x", "y"]'
        assert parse_region_descriptions(raw) == ["x", "y"]

    def test_tolerates_missing_commas(self):
        raw = 'Region Descriptions :\n["one" "two," "three"]'
        assert parse_region_descriptions(raw) == ["one", "two,", "three"]

    def test_unterminated_list_still_parses(self):
        raw = 'Region Descriptions :\n["one", "two"'
        assert parse_region_descriptions(raw) == ["one", "two"]

    def test_no_list_raises(self):
        with pytest.raises(UnparseableResponse):
            parse_region_descriptions("Region Descriptions :\nnothing here")

    def test_no_quotes_raises(self):
        with pytest.raises(UnparseableResponse):
            parse_region_descriptions("Region Descriptions :\n[1, 2, 3]")


class TestRequestValidation:
    def test_needs_exactly_one_mode(self, monkeypatch):
        monkeypatch.delenv("RAHP_LLM_ENDPOINT", raising=False)
        with pytest.raises(ValueError):
            MiningRequest(KIND_REGION, ("a", "p", "b"))
        with pytest.raises(ValueError):
            MiningRequest(KIND_REGION, ("a", "p", "b"),
                          endpoint="http://x", fixtures_dir=str(FIXTURES))

    def test_env_endpoint_counts_as_online(self, monkeypatch):
        monkeypatch.setenv("RAHP_LLM_ENDPOINT", "http://llm.example")
        req = MiningRequest(KIND_REGION, ("a", "p", "b"))
        assert req.resolved_endpoint == "http://llm.example"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            MiningRequest("weird", (), fixtures_dir=str(FIXTURES))


class TestFixtureMode:
    def test_bundled_triplet(self):
        req = MiningRequest(KIND_REGION, ("human", "holding", "wild animal"),
                            fixtures_dir=str(FIXTURES))
        out = mine_region_descriptions(req)
        descs = out.get(("human", "holding", "wild animal"))
        assert len(descs) == 11
        assert descs[0] == "human hand(s) securely gripping the animal"

    def test_vegetable_fixture_survives_sloppy_commas(self):
        req = MiningRequest(KIND_REGION, ("vegetable", "in", "container"),
                            fixtures_dir=str(FIXTURES))
        out = mine_region_descriptions(req)
        descs = out.get(("vegetable", "in", "container"))
        assert len(descs) == 5
        assert descs[0].startswith("The vegetable is contained within")

    def test_missing_triplet(self):
        req = MiningRequest(KIND_REGION, ("ghost", "haunting", "castle"),
                            fixtures_dir=str(FIXTURES))
        with pytest.raises(MissingFixture):
            mine_region_descriptions(req)

    def test_names_from_fixture(self):
        req = MiningRequest(
            KIND_NAMES,
            [["cat", "dog"], ["bear", "elephant", "giraffe", "sheep", "zebra"]],
            fixtures_dir=str(FIXTURES),
        )
        assert mine_super_names(req) == ["pets", "wild animal"]

    def test_names_order_insensitive_key(self):
        req = MiningRequest(KIND_NAMES, [["dog", "cat"]],
                            fixtures_dir=str(FIXTURES))
        assert mine_super_names(req) == ["pets"]

    def test_names_missing_cluster(self):
        req = MiningRequest(KIND_NAMES, [["quark", "boson"]],
                            fixtures_dir=str(FIXTURES))
        with pytest.raises(MissingFixture):
            mine_super_names(req)


class FakeTransport:
    def __init__(self, reply):
        self.reply = reply
        self.calls = []

    def __call__(self, url, body):
        self.calls.append((url, body))
        return {"text": self.reply}


class TestOnlineMode:
    REPLY = 'Region Descriptions :\n["first thing", "second thing"]'

    def test_posts_prompt_and_parses(self):
        transport = FakeTransport(self.REPLY)
        req = MiningRequest(KIND_REGION, ("cat", "on", "mat"),
                            endpoint="http://llm", transport=transport)
        out = mine_region_descriptions(req)
        assert out.get(("cat", "on", "mat")) == ["first thing", "second thing"]
        (url, body), = transport.calls
        assert url == "http://llm"
        assert body == {"prompt": region_mining_prompt("cat", "on", "mat")}

    def test_archive_replay_skips_network(self, tmp_path):
        transport = FakeTransport(self.REPLY)
        req = MiningRequest(KIND_REGION, ("cat", "on", "mat"),
                            endpoint="http://llm", transport=transport,
                            archive_dir=str(tmp_path))
        first = mine_region_descriptions(req)
        assert len(transport.calls) == 1
        archived = list(tmp_path.glob("*.json"))
        assert len(archived) == 1
        doc = json.loads(archived[0].read_text())
        assert doc["raw"] == self.REPLY
        assert doc["parsed"] == ["first thing", "second thing"]

        second = mine_region_descriptions(req)
        assert len(transport.calls) == 1  # served from the archive
        assert second.get(("cat", "on", "mat")) == first.get(("cat", "on", "mat"))

    def test_bad_response_shape(self):
        def transport(url, body):
            return {"unexpected": 1}

        req = MiningRequest(KIND_REGION, ("cat", "on", "mat"),
                            endpoint="http://llm", transport=transport)
        with pytest.raises(UnparseableResponse):
            mine_region_descriptions(req)

    def test_unreachable_endpoint(self):
        req = MiningRequest(KIND_REGION, ("cat", "on", "mat"),
                            endpoint="http://127.0.0.1:1/llm")
        with pytest.raises(EndpointUnreachable):
            mine_region_descriptions(req)

    def test_names_online_strips_quotes(self):
        req = MiningRequest(KIND_NAMES, [["car", "bus"]],
                            endpoint="http://llm",
                            transport=FakeTransport('"road vehicle"\n'))
        assert mine_super_names(req) == ["road vehicle"]

    def test_names_warns_on_long_name(self):
        req = MiningRequest(
            KIND_NAMES, [["car", "bus"]], endpoint="http://llm",
            transport=FakeTransport("a very long category name indeed"),
        )
        with pytest.warns(UserWarning):
            mine_super_names(req)
