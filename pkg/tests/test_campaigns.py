from __future__ import annotations

from datetime import timedelta

import pytest
from hypothesis import given, settings, strategies as st

import oracle_splitmix
from helpers import CATS, ref
from spanlab.campaigns import (
    ASSIGNED,
    COMPLETED,
    FREE,
    Batch,
    CampaignConfig,
    CampaignError,
    CampaignState,
    SourceRef,
    assign_batch,
    build_batches,
    completion_code,
    count_statuses,
    reclaim_idle,
    select_next_batch,
)
from spanlab.llm import LlmConfig
from spanlab.model import utc_now


def refs(n: int):
    return [ref(i) for i in range(n)]


def make_config(**overrides) -> CampaignConfig:
    base = dict(
        campaign_id="c1",
        kind="human",
        sources=(SourceRef("weather", "dev", "forecast-bot"),),
        categories=CATS,
        examples_per_batch=2,
        annotators_per_example=1,
        idle_timeout_s=600,
        shuffle_seed=7,
    )
    base.update(overrides)
    return CampaignConfig(**base)


def make_state(n=5, e=2, a=1, seed=7, **config_overrides) -> CampaignState:
    config = make_config(examples_per_batch=e, annotators_per_example=a, shuffle_seed=seed, **config_overrides)
    state = CampaignState(config=config, batches=build_batches(refs(n), e, a, seed), created_at=utc_now())
    state.rebuild_history()
    return state


class TestBuildBatches:
    def test_even_split_covers_all_once(self):
        batches = build_batches(refs(4), 2, 1, 0)
        assert len(batches) == 2
        seen = [r for b in batches for r in b.examples]
        assert sorted(seen, key=lambda r: r.example_idx) == refs(4)

    def test_remainder_chunk(self):
        batches = build_batches(refs(3), 2, 1, 0)
        assert [len(b.examples) for b in batches] == [2, 1]

    def test_two_replicas_of_one_full_batch(self):
        batches = build_batches(refs(2), 2, 2, 99)
        assert len(batches) == 2
        for batch in batches:
            assert sorted(r.example_idx for r in batch.examples) == [0, 1]

    def test_golden_permutation_seed7(self):
        # pinned from the independent generator script: shuffle(5, 7)
        perm = oracle_splitmix.shuffle(5, 7)
        assert perm == [4, 1, 3, 0, 2]
        batches = build_batches(refs(5), 2, 1, 7)
        got = [[r.example_idx for r in b.examples] for b in batches]
        assert got == [[4, 1], [3, 0], [2]]

    def test_batch_idx_is_global_across_replicas(self):
        batches = build_batches(refs(3), 2, 2, 1)
        assert [b.batch_idx for b in batches] == [0, 1, 2, 3]

    def test_all_batches_start_free(self):
        assert all(b.status == FREE for b in build_batches(refs(6), 2, 2, 5))

    def test_empty_examples(self):
        with pytest.raises(CampaignError) as exc:
            build_batches([], 2, 1, 0)
        assert exc.value.code == "EMPTY_EXAMPLES"

    def test_duplicate_example(self):
        with pytest.raises(CampaignError) as exc:
            build_batches([ref(0), ref(1), ref(0)], 2, 1, 0)
        assert exc.value.code == "DUPLICATE_EXAMPLE"

    @settings(max_examples=60)
    @given(
        n=st.integers(min_value=1, max_value=20),
        e=st.integers(min_value=1, max_value=5),
        a=st.integers(min_value=1, max_value=3),
        seed=st.integers(min_value=0, max_value=2**64 - 1),
    )
    def test_each_example_in_exactly_a_batches(self, n, e, a, seed):
        batches = build_batches(refs(n), e, a, seed)
        counts: dict[int, int] = {}
        for batch in batches:
            idxs = [r.example_idx for r in batch.examples]
            assert len(set(idxs)) == len(idxs), "duplicate example within a batch"
            for i in idxs:
                counts[i] = counts.get(i, 0) + 1
        assert counts == {i: a for i in range(n)}

    @given(
        n=st.integers(min_value=1, max_value=20),
        seed=st.integers(min_value=0, max_value=2**64 - 1),
    )
    def test_deterministic(self, n, seed):
        assert build_batches(refs(n), 2, 2, seed) == build_batches(refs(n), 2, 2, seed)


class TestConfig:
    def test_round_trip(self):
        config = make_config()
        assert CampaignConfig.from_json(config.to_json()) == config

    def test_llm_kind_requires_llm_config(self):
        with pytest.raises(ValueError):
            make_config(kind="llm")

    def test_llm_config_round_trip(self):
        llm = LlmConfig(
            protocol="open_inference", base_url="http://localhost:1", model="m",
            system_message="s", prompt_template="{input} {output}",
        )
        config = make_config(kind="llm", llm=llm)
        assert CampaignConfig.from_json(config.to_json()).llm == llm

    def test_human_kind_rejects_llm_config(self):
        llm = LlmConfig(
            protocol="open_inference", base_url="http://localhost:1", model="m",
            system_message="s", prompt_template="{input} {output}",
        )
        with pytest.raises(ValueError):
            make_config(kind="human", llm=llm)

    @pytest.mark.parametrize("field, value", [
        ("examples_per_batch", 0),
        ("annotators_per_example", 0),
        ("idle_timeout_s", 0),
        ("shuffle_seed", -1),
        ("shuffle_seed", 2**64),
        ("kind", "robot"),
        ("sources", ()),
    ])
    def test_rejects_bad_values(self, field, value):
        with pytest.raises(ValueError):
            make_config(**{field: value})

    def test_rejects_duplicate_sources(self):
        src = SourceRef("weather", "dev", "forecast-bot")
        with pytest.raises(ValueError):
            make_config(sources=(src, src))


class TestSelection:
    def test_first_caller_gets_lowest_free(self):
        state = make_state()
        assert select_next_batch(state, "a1").batch_idx == 0

    def test_assigned_batches_are_skipped(self):
        state = make_state()
        assign_batch(state, state.batches[0], "a1", utc_now())
        assert select_next_batch(state, "a2").batch_idx == 1

    def test_mirror_replica_is_skipped_for_same_annotator(self):
        # N=E makes each replica one batch with identical example sets
        state = make_state(n=2, e=2, a=2)
        first = select_next_batch(state, "a1")
        assign_batch(state, first, "a1", utc_now())
        first.status = COMPLETED
        assert select_next_batch(state, "a1") is None
        assert select_next_batch(state, "a2") is not None

    def test_currently_held_examples_also_block(self):
        state = make_state(n=2, e=2, a=2)
        assign_batch(state, state.batches[0], "a1", utc_now())
        assert select_next_batch(state, "a1") is None


class TestReclaim:
    def test_no_assigned_batches(self):
        state = make_state()
        assert reclaim_idle(state, utc_now()) == 0

    def test_exactly_timeout_is_kept(self):
        state = make_state()
        now = utc_now()
        assign_batch(state, state.batches[0], "a1", now)
        assert reclaim_idle(state, now + timedelta(seconds=600)) == 0
        assert state.batches[0].status == ASSIGNED

    def test_past_timeout_is_reclaimed(self):
        state = make_state()
        now = utc_now()
        assign_batch(state, state.batches[0], "a1", now)
        assert reclaim_idle(state, now + timedelta(seconds=601)) == 1
        batch = state.batches[0]
        assert (batch.status, batch.annotator_id, batch.assigned_at) == (FREE, None, None)

    def test_reclaimed_examples_become_eligible_again(self):
        state = make_state(n=2, e=2, a=1)
        now = utc_now()
        assign_batch(state, state.batches[0], "a1", now)
        reclaim_idle(state, now + timedelta(seconds=601))
        assert select_next_batch(state, "a1").batch_idx == 0

    def test_completed_batches_never_revert(self):
        state = make_state()
        now = utc_now()
        assign_batch(state, state.batches[0], "a1", now)
        state.batches[0].status = COMPLETED
        assert reclaim_idle(state, now + timedelta(seconds=10_000)) == 0
        assert state.batches[0].status == COMPLETED


class TestCompletionCode:
    def test_pinned_sha256_vector(self):
        # sha256("demo:0:a1:s") starts bef47354 per any external sha256 tool
        assert completion_code("demo", 0, "a1", "s") == "demo-0-bef47354"

    def test_code_depends_on_every_part(self):
        base = completion_code("demo", 0, "a1", "s")
        assert completion_code("demo", 1, "a1", "s") != base
        assert completion_code("demo", 0, "a2", "s") != base
        assert completion_code("demo", 0, "a1", "x") != base

    def test_code_shape(self):
        code = completion_code("weather-human", 12, "worker-9", "secret")
        prefix, idx, h8 = code.rsplit("-", 2)
        assert prefix == "weather-human" and idx == "12"
        assert len(h8) == 8 and set(h8) <= set("0123456789abcdef")


def test_count_statuses():
    state = make_state()
    assign_batch(state, state.batches[0], "a1", utc_now())
    state.batches[1].status = COMPLETED
    assert count_statuses(state) == {FREE: 1, ASSIGNED: 1, COMPLETED: 1}


def test_batch_json_round_trip():
    state = make_state()
    assign_batch(state, state.batches[0], "a1", utc_now())
    for batch in state.batches:
        assert Batch.from_json(batch.to_json()) == batch
