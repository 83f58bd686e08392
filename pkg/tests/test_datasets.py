"""Dataset manifest, fetch plumbing, and synthetic stand-in generators."""

import gzip
import hashlib

import numpy as np
import pytest

from socialdht import datasets
from socialdht.datasets import (DatasetUnavailable, MANIFEST, canonical_name,
                                community_graph, default_data_dir, ego_graph,
                                fb_synthetic, fetch, resolve_dataset,
                                wv_synthetic)
from socialdht.graph import load_edge_list, write_edge_list


TOY_EDGES = "0 1\n1 2\n2 0\n3 1\n"


def toy_info(tmp_path, sha256=None, url=None):
    src = tmp_path / "toy-src.txt.gz"
    src.write_bytes(gzip.compress(TOY_EDGES.encode()))
    return datasets.DatasetInfo(
        name="toy", url=url or src.as_uri(), filename="toy.txt",
        directed=False, nodes=4, listed_edges=4, sha256=sha256)


class TestManifest:
    def test_known_names(self):
        assert set(MANIFEST) == {"fb", "wv", "sd", "tw"}
        assert MANIFEST["fb"].nodes == 4039
        assert MANIFEST["wv"].directed is True

    def test_canonical_name_aliases(self):
        assert canonical_name("Facebook") == "fb"
        assert canonical_name("  WIKI-VOTE ") == "wv"
        assert canonical_name("slashdot") == "sd"
        assert canonical_name("fb") == "fb"
        # unknown names pass through for the caller to reject
        assert canonical_name("mystery") == "mystery"

    def test_data_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOCIALDHT_DATA", str(tmp_path / "xyz"))
        assert default_data_dir() == tmp_path / "xyz"


class TestFetch:
    def test_unknown_dataset(self, tmp_path):
        with pytest.raises(DatasetUnavailable, match="unknown dataset"):
            fetch("nope", data_dir=tmp_path)

    def test_file_url_roundtrip(self, tmp_path, monkeypatch):
        monkeypatch.setitem(MANIFEST, "toy", toy_info(tmp_path))
        out = fetch("toy", data_dir=tmp_path / "cache")
        assert out == tmp_path / "cache" / "toy.txt"
        assert out.read_text() == TOY_EDGES

    def test_existing_file_not_refetched(self, tmp_path, monkeypatch):
        monkeypatch.setitem(MANIFEST, "toy", toy_info(tmp_path))
        cache = tmp_path / "cache"
        fetch("toy", data_dir=cache)
        # source gone; cached copy must still satisfy the call
        monkeypatch.setitem(
            MANIFEST, "toy",
            toy_info(tmp_path, url=(tmp_path / "missing.gz").as_uri()))
        (tmp_path / "toy-src.txt.gz").unlink()
        assert fetch("toy", data_dir=cache).read_text() == TOY_EDGES
        with pytest.raises(DatasetUnavailable, match="cannot fetch"):
            fetch("toy", data_dir=cache, force=True)

    def test_checksum_verified(self, tmp_path, monkeypatch):
        good = hashlib.sha256(TOY_EDGES.encode()).hexdigest()
        monkeypatch.setitem(MANIFEST, "toy", toy_info(tmp_path, sha256=good))
        assert fetch("toy", data_dir=tmp_path / "a").read_text() == TOY_EDGES

    def test_checksum_mismatch_raises(self, tmp_path, monkeypatch):
        monkeypatch.setitem(MANIFEST, "toy", toy_info(tmp_path, sha256="0" * 64))
        with pytest.raises(DatasetUnavailable, match="checksum mismatch"):
            fetch("toy", data_dir=tmp_path / "a")
        assert not (tmp_path / "a" / "toy.txt").exists()


class TestResolveDataset:
    def test_explicit_path(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text(TOY_EDGES)
        g, provenance = resolve_dataset(str(p), data_dir=tmp_path)
        assert provenance == "file"
        assert (g.n, g.edge_count) == (4, 4)

    def test_unknown_name(self, tmp_path):
        with pytest.raises(DatasetUnavailable, match="neither a file nor"):
            resolve_dataset("mystery", data_dir=tmp_path)

    def test_local_real_file_wins(self, tmp_path):
        (tmp_path / MANIFEST["fb"].filename).write_text(TOY_EDGES)
        g, provenance = resolve_dataset("fb", data_dir=tmp_path,
                                        allow_fetch=False)
        assert provenance == "real"
        assert g.n == 4
        assert g.meta["listed_edges"] == MANIFEST["fb"].listed_edges

    def test_directed_source_symmetrized(self, tmp_path):
        (tmp_path / MANIFEST["wv"].filename).write_text(
            "# header line\n0\t1\n1\t0\n1\t2\n")
        g, provenance = resolve_dataset("wv", data_dir=tmp_path,
                                        allow_fetch=False,
                                        allow_synthetic=False)
        assert provenance == "real"
        assert (g.n, g.edge_count) == (3, 2)
        assert g.has_edge(2, 1)

    def test_synthetic_fallback_and_cache(self, tmp_path, monkeypatch):
        def refuse(*a, **kw):
            raise DatasetUnavailable("offline")
        monkeypatch.setattr(datasets, "fetch", refuse)
        g1, prov1 = resolve_dataset("fb", data_dir=tmp_path)
        assert prov1 == "synthetic"
        assert g1.n == 4039
        cache = tmp_path / "fb-synthetic.txt"
        assert cache.exists()
        # second resolve reads the cached bytes, not the generator
        g2, prov2 = resolve_dataset("fb", data_dir=tmp_path,
                                    allow_fetch=False)
        assert prov2 == "synthetic"
        assert g2 == g1

    def test_no_fallbacks_raises(self, tmp_path):
        with pytest.raises(DatasetUnavailable, match="not present"):
            resolve_dataset("fb", data_dir=tmp_path, allow_fetch=False,
                            allow_synthetic=False)

    def test_sd_has_no_synthetic(self, tmp_path):
        with pytest.raises(DatasetUnavailable):
            resolve_dataset("sd", data_dir=tmp_path, allow_fetch=False)


class TestGenerators:
    def test_community_graph_basic(self):
        g = community_graph(150, 10, 20, p_in=0.5, extra_degree=4.0, seed=3)
        assert g.n == 150
        assert g.meta["generator"] == "community_graph"
        assert len(g.bfs_ball(0, g.n)) == g.n
        assert g == community_graph(150, 10, 20, p_in=0.5, extra_degree=4.0,
                                    seed=3)
        assert g != community_graph(150, 10, 20, p_in=0.5, extra_degree=4.0,
                                    seed=4)

    def test_ego_graph_hub_structure(self):
        hubs = 4
        g = ego_graph(200, hubs=hubs, block_lo=8, block_hi=12, p_block=0.6,
                      cross_per_node=2.0, global_per_node=0.5, seed=9)
        assert g.n == 200
        assert g.meta["generator"] == "ego_graph"
        assert len(g.bfs_ball(0, g.n)) == g.n
        # hubs are the first ids, pairwise adjacent, and dominate degrees
        for a in range(hubs):
            for b in range(a + 1, hubs):
                assert g.has_edge(a, b)
        hub_degrees = [g.degree(h) for h in range(hubs)]
        member_degrees = [g.degree(i) for i in range(hubs, g.n)]
        assert min(hub_degrees) > max(member_degrees)

    def test_ego_graph_strongest_tie_is_usually_a_hub(self):
        from socialdht.graph import StrengthProvider, top_k_strongest
        hubs = 4
        g = ego_graph(200, hubs=hubs, block_lo=8, block_hi=12, p_block=0.6,
                      cross_per_node=2.0, global_per_node=0.5, seed=9)
        provider = StrengthProvider()
        best = [top_k_strongest(g, i, 1, provider)[0] for i in range(hubs, g.n)]
        frac = np.mean([b < hubs for b in best])
        assert frac > 0.5


class TestStandIns:
    def test_fb_shape(self):
        g = fb_synthetic()
        assert g.n == 4039
        assert 86_000 <= g.edge_count <= 92_000
        assert 0.55 <= g.average_clustering() <= 0.67
        assert len(g.bfs_ball(0, g.n)) == g.n
        assert g.meta["name"] == "fb-synthetic"

    def test_wv_shape(self):
        g = wv_synthetic()
        assert g.n == 7115
        assert 95_000 <= g.edge_count <= 106_000
        assert 0.11 <= g.average_clustering() <= 0.17
        assert len(g.bfs_ball(0, g.n)) == g.n

    def test_stand_in_determinism(self):
        assert fb_synthetic() == fb_synthetic()

    def test_cache_bytes_stable(self, tmp_path):
        g = wv_synthetic()
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_edge_list(g, p1)
        write_edge_list(wv_synthetic(), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert load_edge_list(p1) == g
