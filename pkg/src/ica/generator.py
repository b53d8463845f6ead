"""Calibrated synthetic incident corpus with a planted causal ground truth.

Each incident is drawn from a symptom family; its root-cause and
resolution families follow a block-diagonal causal map. Exactly one
root-cause span and one resolution span are planted per incident, each
introduced by a cue phrase, and the sidecar ground truth records the
family assignments and the planted span texts as they appear in the
documents (noise included). Document lengths are severity-dependent and
calibrated so that corpus-level means land near the reference targets
(subject ~5.2, resolution doc ~18.3, rca doc ~110.1 non-stop tokens).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .corpus import CorpusError, InvestigationUpdate, PrbRecord

# --- template banks -------------------------------------------------------

# (cores, suffixes, topical vocabulary). Core variants inside one family
# share a two-token anchor so the family stays a single embedding blob.
SYMPTOM_FAMILIES: list[tuple[list[str], list[str], list[str]]] = [
    (["connection pool exhaustion", "connection pool saturation", "connection pool errors"],
     ["on app tier", "for jdbc clients"],
     ["connection", "pool", "active", "requests", "jdbc", "saturation"]),
    (["high app cpu", "app cpu spike", "app cpu climbing"],
     ["on web servers", "under peak load"],
     ["cpu", "utilization", "load", "spike", "cores", "app"]),
    (["message queue backlog", "message queue lag", "message queue stalled"],
     ["in broker cluster", "for async jobs"],
     ["queue", "broker", "consumer", "lag", "backlog", "messages"]),
    (["database replication lag", "database replication drift", "database replication stalled"],
     ["on standby", "for read replicas"],
     ["replication", "replica", "lag", "binlog", "standby", "database"]),
    (["search index delayed", "search index stale", "search index lagging"],
     ["for org queries", "on index shards"],
     ["search", "index", "indexing", "shards", "stale", "documents"]),
    (["login failures", "login errors", "login timeouts"],
     ["for sso users", "at peak hours"],
     ["login", "auth", "sso", "tokens", "sessions", "failures"]),
    (["api latency spike", "api latency degraded", "api latency climbing"],
     ["on rest endpoints", "for mobile clients"],
     ["latency", "api", "response", "endpoints", "p99", "timeouts"]),
    (["jvm memory leak", "jvm memory pressure", "jvm memory climbing"],
     ["on app nodes", "in heap workers"],
     ["memory", "heap", "jvm", "leak", "oom", "garbage"]),
    (["disk io saturation", "disk io spikes", "disk io contention"],
     ["on db hosts", "for write bursts"],
     ["disk", "io", "iops", "writes", "storage", "saturation"]),
    (["cache miss storm", "cache miss surge", "cache miss churn"],
     ["on edge layer", "for hot keys"],
     ["cache", "eviction", "hit", "ratio", "keys", "redis"]),
    (["tls handshake errors", "tls handshake failures", "tls handshake timeouts"],
     ["at ingress", "for legacy clients"],
     ["tls", "ssl", "handshake", "certificate", "ciphers", "ingress"]),
    (["thread pool starvation", "thread pool exhausted", "thread pool blocked"],
     ["on jetty workers", "under burst traffic"],
     ["threads", "jetty", "starvation", "workers", "blocked", "pool"]),
    (["gc pause spikes", "gc pause storms", "gc pause regression"],
     ["on old gen", "in jvm tier"],
     ["gc", "pauses", "collection", "generation", "jvm", "heap"]),
    (["network packet loss", "network packet drops", "network packet errors"],
     ["between tiers", "on crosslink"],
     ["network", "packets", "loss", "switch", "drops", "link"]),
    (["kafka consumer lag", "kafka consumer backlog", "kafka consumer stalled"],
     ["on topic partitions", "for event pipeline"],
     ["kafka", "partitions", "offsets", "stream", "consumers", "topics"]),
    (["dns resolution failures", "dns resolution timeouts", "dns resolution errors"],
     ["for external domains", "at resolver"],
     ["dns", "resolver", "lookup", "domains", "cname", "records"]),
    (["pod crash loop", "pod crash cycling", "pod crash storms"],
     ["in orchestration layer", "on worker nodes"],
     ["pods", "containers", "restarts", "kubelet", "oomkilled", "scheduler"]),
    (["rate limit rejections", "rate limit errors", "rate limit saturation"],
     ["on public api", "for bulk clients"],
     ["rate", "limit", "throttling", "rejections", "quota", "burst"]),
    (["storage quota exceeded", "storage quota alerts", "storage quota breach"],
     ["on file store", "for attachments"],
     ["storage", "quota", "capacity", "volume", "usage", "alerts"]),
    (["database deadlocks detected", "database deadlocks rising", "database deadlocks blocking"],
     ["on primary db", "for batch writes"],
     ["deadlock", "locks", "contention", "transactions", "waits", "rows"]),
    (["user session errors", "user session stale", "user session drops"],
     ["after failover", "on sticky routing"],
     ["sessions", "affinity", "cookies", "routing", "stale", "failover"]),
    (["webhook delivery delays", "webhook delivery failures", "webhook delivery retries"],
     ["for partner integrations", "on outbound queue"],
     ["webhook", "callbacks", "retries", "delivery", "outbound", "integrations"]),
    (["report generation timeouts", "report generation failures", "report generation stuck"],
     ["for large orgs", "on reporting cluster"],
     ["reports", "analytics", "timeouts", "generation", "jobs", "export"]),
    (["email delivery backlog", "email delivery failures", "email delivery delayed"],
     ["on relay hosts", "for notification queue"],
     ["email", "smtp", "relay", "bounce", "delivery", "notifications"]),
]

# (span pattern, slot a options, slot b options)
ROOT_CAUSE_FAMILIES: list[tuple[str, list[str], list[str]]] = [
    ("a regression in the {a} {b} job",
     ["nightly", "hourly", "weekly", "quarterly"], ["batch", "sync", "billing", "indexing"]),
    ("a connection leak in the {a} {b} service",
     ["upstream", "legacy", "internal", "partner"], ["payment", "search", "metadata", "profile"]),
    ("an expired {a} certificate on the {b} endpoint",
     ["tls", "ssl", "intermediate", "client"], ["ingress", "api", "login", "gateway"]),
    ("a misconfigured {a} rule on the {b} load balancer",
     ["routing", "health check", "sticky session", "weighting"], ["edge", "internal", "regional", "primary"]),
    ("a failing {a} on the {b} host",
     ["raid card", "disk controller", "memory dimm", "network card"], ["database", "storage", "primary", "standby"]),
    ("memory pressure from {a} {b} exports",
     ["oversized", "concurrent", "unbounded", "scheduled"], ["report", "analytics", "dashboard", "audit"]),
    ("a {a} surge of {b} requests",
     ["sudden", "sustained", "malformed", "scripted"], ["bulk api", "login", "search", "checkout"]),
    ("a {a} failure on the {b} network switch",
     ["crosslink", "firmware", "port", "fabric"], ["core", "rack", "spine", "edge"]),
    ("{a} garbage collection stalls in the {b} tier",
     ["concurrent", "full", "promotion", "humongous"], ["app", "cache", "queue", "search"]),
    ("a failed {a} rotation for the {b} account",
     ["credential", "password", "api key", "secret"], ["service", "replication", "monitoring", "integration"]),
    ("a schema migration holding {a} locks on {b} tables",
     ["exclusive", "row", "table", "advisory"], ["core", "audit", "billing", "user"]),
    ("an outage at the {a} {b} provider",
     ["upstream", "third party", "regional", "managed"], ["dns", "email", "sms", "payment"]),
    ("a bad {a} change pushed to {b}",
     ["config", "feature flag", "routing", "quota"], ["production", "all pods", "the edge", "one region"]),
    ("a degraded {a} plan on the {b} query",
     ["execution", "index scan", "join", "merge"], ["dashboard", "search", "billing", "audit"]),
    ("clock skew between {a} nodes and the {b} quorum",
     ["app", "cache", "broker", "db"], ["auth", "session", "storage", "election"]),
    ("a retry storm triggered by {a} {b} timeouts",
     ["aggressive", "unbounded", "cascading", "synchronized"], ["client", "webhook", "rpc", "upstream"]),
    ("a stale {a} record cached beyond {b} ttl",
     ["cname", "dns", "alias", "srv"], ["the configured", "an expired", "a negative", "the default"]),
    ("the {a} volume filling up with {b} logs",
     ["data", "root", "archive", "temp"], ["debug", "audit", "transaction", "rotated"]),
    ("a thread leak in the {a} {b} handler",
     ["async", "websocket", "upload", "scheduler"], ["request", "event", "callback", "retry"]),
    ("a kernel {a} bug on {b} hosts",
     ["scheduler", "network driver", "filesystem", "memory management"], ["patched", "virtualized", "bare metal", "edge"]),
    ("an index rebuild saturating the {a} {b}",
     ["primary", "replica", "search", "reporting"], ["database", "cluster", "shard", "node"]),
    ("a permission change blocking the {a} {b} pipeline",
     ["deploy", "ingestion", "replication", "backup"], ["artifact", "data", "schema", "config"]),
    ("memory fragmentation in the {a} {b} allocator",
     ["slab", "arena", "buffer", "page"], ["cache", "broker", "proxy", "runtime"]),
    ("the autoscaler {a} during the {b} window",
     ["flapping", "overshooting", "stuck", "disabled"], ["peak", "maintenance", "failover", "deploy"]),
]

RESOLUTION_FAMILIES: list[tuple[str, list[str], list[str]]] = [
    ("restarting the {a} {b}",
     ["app", "web", "worker", "broker"], ["tier", "nodes", "pool", "fleet"]),
    ("rolling back the {a} {b}",
     ["latest", "faulty", "staged", "partial"], ["release", "config push", "migration", "deploy"]),
    ("failing over to the {a} {b}",
     ["standby", "secondary", "regional", "warm"], ["database", "cluster", "replica", "site"]),
    ("scaling out the {a} {b} capacity",
     ["worker", "consumer", "cache", "api"], ["pool", "tier", "fleet", "group"]),
    ("flushing the {a} {b} cache",
     ["edge", "session", "metadata", "query"], ["layer", "cluster", "shard", "store"]),
    ("throttling {a} {b} traffic",
     ["bulk", "inbound", "partner", "scripted"], ["api", "login", "export", "webhook"]),
    ("renewing the {a} certificate on the {b}",
     ["expired", "tls", "intermediate", "wildcard"], ["ingress", "gateway", "login endpoints", "relay"]),
    ("replacing the {a} {b} hardware",
     ["faulty", "degraded", "flagged", "aging"], ["switch", "disk", "host", "controller"]),
    ("raising the {a} {b} limits",
     ["connection", "thread", "file handle", "memory"], ["pool", "executor", "container", "worker"]),
    ("pausing the {a} {b} pipeline",
     ["nightly", "bulk", "reindex", "archival"], ["batch", "export", "ingestion", "sync"]),
    ("deploying a hotfix to the {a} {b} service",
     ["search", "billing", "auth", "metadata"], ["api", "backend", "worker", "edge"]),
    ("draining and requeueing the {a} {b}",
     ["stuck", "poisoned", "stale", "orphaned"], ["messages", "jobs", "events", "callbacks"]),
    ("flushing {a} dns caches on the {b}",
     ["stale", "negative", "regional", "resolver"], ["pods", "app hosts", "edge", "resolvers"]),
    ("blocking the {a} {b} client",
     ["offending", "misbehaving", "unthrottled", "scripted"], ["bulk api", "integration", "crawler", "partner"]),
    ("rebuilding the {a} {b} index",
     ["corrupted", "stale", "fragmented", "delayed"], ["search", "reporting", "database", "shard"]),
    ("tuning {a} gc settings on the {b} tier",
     ["heap", "pause", "generation", "allocation"], ["app", "broker", "search", "cache"]),
    ("invalidating {a} {b} sessions",
     ["stale", "sticky", "orphaned", "expired"], ["user", "sso", "api", "admin"]),
    ("increasing the {a} {b} quota",
     ["storage", "attachment", "mailbox", "volume"], ["tenant", "org", "cluster", "pool"]),
    ("terminating the {a} {b} queries",
     ["runaway", "blocking", "long running", "unindexed"], ["report", "dashboard", "analytics", "audit"]),
    ("rebalancing the {a} {b} partitions",
     ["kafka", "queue", "shard", "broker"], ["topic", "consumer", "storage", "cluster"]),
]

CHATTER_SENTENCES = [
    "The on call engineer acknowledged the page within a few minutes.",
    "Dashboards were reviewed for anomalies across the affected services.",
    "No recent deploys were found in the change log.",
    "The incident bridge was opened and stakeholders were notified.",
    "Monitoring showed elevated error rates during the window.",
    "The team compared current graphs against last week's baseline.",
    "Alert thresholds were double checked against runbook guidance.",
    "A ticket was filed to track follow up actions.",
    "Relevant logs were pulled from the affected hosts.",
    "Traffic was inspected for unusual patterns from specific clients.",
    "The investigation was handed over to the service owner team.",
    "Runbook steps were executed without immediate improvement.",
    "Capacity metrics remained within normal bounds elsewhere.",
    "Customer impact reports were correlated with the alert timeline.",
    "Paging escalated to the secondary on call after no response.",
    "Synthetic checks were run from multiple regions.",
    "A war room summary was posted for leadership visibility.",
    "The change advisory board was consulted about recent rollouts.",
]

TOPICAL_TEMPLATES = [
    "Graphs showed {v1} and {v2} trending upward on the affected hosts.",
    "Engineers observed abnormal {v1} metrics correlated with {v2}.",
    "Initial triage pointed at {v1} saturation affecting {v2}.",
    "Sampling of requests confirmed {v1} issues tied to {v2}.",
    "The first responders flagged {v1} alarms alongside {v2} warnings.",
]

RCA_FILLER_TEMPLATES = [
    "Deeper analysis of the {v1} metrics narrowed the window to a single cluster.",
    "Log correlation ruled out {v1} and {v2} as contributing factors.",
    "The timeline showed {v1} degradation beginning before the first alert.",
    "Host level inspection confirmed the {v1} pattern on several nodes.",
    "Packet captures around the spike matched the {v1} behaviour seen earlier.",
    "A controlled replay reproduced the {v1} signature in staging.",
]

RCA_FILLER_GENERIC = [
    "The investigation compared configuration drift across the fleet.",
    "Historical incidents were reviewed for matching signatures.",
    "Vendor support was engaged to validate the findings.",
    "A detailed postmortem document was circulated afterwards.",
    "Remediation items were added to the quarterly reliability plan.",
    "Ownership for the permanent fix was assigned to the platform team.",
]

RESOLUTION_FILLER = [
    "The mitigation was verified by watching the recovery graphs.",
    "Service health returned to normal within the hour.",
    "Follow up hardening tasks were captured in the tracker.",
    "The standby capacity absorbed the remaining load.",
    "Customers were notified once error rates subsided.",
]

ROOT_CAUSE_CUES = [
    "The incident was caused by {span}.",
    "Root cause was {span}.",
    "The outage was caused by {span}.",
]

# Decoy sentences cite a secondary lead: another span variant from the
# same family, attached with a weaker cue. Investigation write-ups
# usually mention more than one candidate cause or action.
ROOT_CAUSE_DECOYS = [
    "An early theory blamed the impact on unrelated issues due to {d}.",
    "A parallel incident that week was due to {d}.",
]

RESOLUTION_CUES = [
    "The incident was resolved by {span}.",
    "The issue was fixed by {span}.",
    "The impact was resolved by {span}.",
]

RESOLUTION_DECOYS = [
    "A side effect on alerting was mitigated by {d}.",
    "An unrelated ticket that day was mitigated by {d}.",
]

# Adjacent word pairs occasionally run together, mirroring the
# agglutination lexicon the tokenizer knows how to expand.
JOINABLE_PAIRS = {
    ("conn", "pool"): "connpool",
    ("connection", "pool"): "connectionpool",
    ("message", "queue"): "messagequeue",
    ("thread", "pool"): "threadpool",
    ("batch", "job"): "batchjob",
    ("load", "balancer"): "loadbalancer",
    ("disk", "io"): "diskio",
    ("search", "index"): "searchindex",
    ("rate", "limit"): "ratelimit",
    ("db", "cpu"): "dbcpu",
    ("app", "cpu"): "appcpu",
}

MODIFIERS = ["intermittent", "severe", "recurring", "sporadic"]

# Filler sentence counts per severity, tuned against the corpus-level
# non-stop token targets (rca 189/152/86, resolution 28/21/17).
_RCA_FILLERS = {0: 26, 1: 21, 2: 11}
_RES_FILLERS = {0: 4, 1: 3, 2: 2}
_INV_UPDATES = {0: 5, 1: 3, 2: 2}


@dataclass
class GeneratorConfig:
    n: int
    k_symptom: int = 12
    k_rootcause: int = 12
    k_resolution: int = 10
    typo_prob: float = 0.012
    agglutination_prob: float = 0.05
    decoy_cue_prob: float = 0.6
    distractor_rate: float = 0.9
    severity_mix: tuple[float, float, float] = (0.0361, 0.3123, 0.6515)
    host_prob: float = 0.8
    start_date: str = "2023-01-01"
    span_days: int = 730

    def validate(self) -> None:
        if self.n < 1:
            raise CorpusError("n must be >= 1")
        if min(self.k_symptom, self.k_rootcause, self.k_resolution) < 1:
            raise CorpusError("family counts must be >= 1")
        if self.n < self.k_symptom:
            raise CorpusError("n must be >= k_symptom")
        if self.k_symptom > len(SYMPTOM_FAMILIES):
            raise CorpusError(f"k_symptom exceeds available families ({len(SYMPTOM_FAMILIES)})")
        if self.k_rootcause > len(ROOT_CAUSE_FAMILIES):
            raise CorpusError(f"k_rootcause exceeds available families ({len(ROOT_CAUSE_FAMILIES)})")
        if self.k_resolution > len(RESOLUTION_FAMILIES):
            raise CorpusError(f"k_resolution exceeds available families ({len(RESOLUTION_FAMILIES)})")
        # Reference percentages sum to 99.99; allow rounding slack.
        if abs(sum(self.severity_mix) - 1.0) > 1e-3:
            raise CorpusError("severity_mix must sum to 1")

    @classmethod
    def zero_noise(cls, n: int, **kw) -> "GeneratorConfig":
        kw.setdefault("typo_prob", 0.0)
        kw.setdefault("agglutination_prob", 0.0)
        kw.setdefault("decoy_cue_prob", 0.0)
        return cls(n=n, **kw)


@dataclass
class SyntheticGroundTruth:
    """Planted family assignments and span texts, the test oracle."""

    symptom_family_of: dict[str, int] = field(default_factory=dict)
    rootcause_family_of: dict[str, int] = field(default_factory=dict)
    resolution_family_of: dict[str, int] = field(default_factory=dict)
    cause_pairs: set[tuple[int, int]] = field(default_factory=set)
    resolution_pairs: set[tuple[int, int]] = field(default_factory=set)
    planted_root_cause: dict[str, str] = field(default_factory=dict)
    planted_resolution: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "families": {
                "symptom": self.symptom_family_of,
                "rootcause": self.rootcause_family_of,
                "resolution": self.resolution_family_of,
            },
            "causal_map": {
                "cause": sorted(list(p) for p in self.cause_pairs),
                "resolution": sorted(list(p) for p in self.resolution_pairs),
            },
            "planted_spans": {
                iid: {
                    "rootcause": self.planted_root_cause[iid],
                    "resolution": self.planted_resolution[iid],
                }
                for iid in sorted(self.planted_root_cause)
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntheticGroundTruth":
        spans = obj.get("planted_spans", {})
        return cls(
            symptom_family_of=dict(obj["families"]["symptom"]),
            rootcause_family_of=dict(obj["families"]["rootcause"]),
            resolution_family_of=dict(obj["families"]["resolution"]),
            cause_pairs={tuple(p) for p in obj["causal_map"]["cause"]},
            resolution_pairs={tuple(p) for p in obj["causal_map"]["resolution"]},
            planted_root_cause={k: v["rootcause"] for k, v in spans.items()},
            planted_resolution={k: v["resolution"] for k, v in spans.items()},
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "SyntheticGroundTruth":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class _Noiser:
    """Token-level typo and agglutination noise, one RNG stream."""

    def __init__(self, rng: random.Random, typo_prob: float, agglutination_prob: float):
        self.rng = rng
        self.typo_prob = typo_prob
        self.agg_prob = agglutination_prob

    def _typo(self, word: str) -> str:
        if len(word) < 4 or not word.isalpha():
            return word
        i = self.rng.randrange(len(word) - 1)
        op = self.rng.random()
        if op < 0.4:
            return word[:i] + word[i + 1] + word[i] + word[i + 2:]
        if op < 0.7:
            return word[:i] + word[i + 1:]
        return word[:i] + word[i] + word[i:]

    def apply(self, text: str) -> str:
        if self.typo_prob == 0 and self.agg_prob == 0:
            return text
        words = text.split(" ")
        if self.agg_prob > 0:
            joined: list[str] = []
            i = 0
            while i < len(words):
                if i + 1 < len(words):
                    key = (words[i].lower(), words[i + 1].lower())
                    merged = JOINABLE_PAIRS.get(key)
                    if merged and self.rng.random() < self.agg_prob:
                        joined.append(merged)
                        i += 2
                        continue
                joined.append(words[i])
                i += 1
            words = joined
        if self.typo_prob > 0:
            words = [
                self._typo(w) if self.rng.random() < self.typo_prob else w
                for w in words
            ]
        return " ".join(words)


def _fill(template: str, rng: random.Random, vocab: list[str]) -> str:
    v1, v2 = rng.sample(vocab, 2)
    return template.format(v1=v1, v2=v2)


def _span_from(pattern: tuple[str, list[str], list[str]], rng: random.Random) -> str:
    tmpl, a_opts, b_opts = pattern
    return tmpl.format(a=rng.choice(a_opts), b=rng.choice(b_opts))


def generate_corpus(config: GeneratorConfig, seed: int) -> tuple[list[PrbRecord], SyntheticGroundTruth]:
    """Deterministically generate a corpus and its planted ground truth."""
    config.validate()
    rng = random.Random(seed)
    noiser = _Noiser(rng, config.typo_prob, config.agglutination_prob)
    truth = SyntheticGroundTruth()

    start = datetime.fromisoformat(config.start_date).replace(tzinfo=timezone.utc)
    minutes_span = config.span_days * 24 * 60
    offsets = sorted(rng.randrange(minutes_span) for _ in range(config.n))

    # Round-robin base guarantees every symptom family is realized.
    fam_seq = [i % config.k_symptom for i in range(config.n)]
    rng.shuffle(fam_seq)

    records: list[PrbRecord] = []
    for i in range(config.n):
        iid = f"prb-{i:05d}"
        sf = fam_seq[i]
        rf = sf % config.k_rootcause
        resf = sf % config.k_resolution
        truth.symptom_family_of[iid] = sf
        truth.rootcause_family_of[iid] = rf
        truth.resolution_family_of[iid] = resf
        truth.cause_pairs.add((sf, rf))
        truth.resolution_pairs.add((sf, resf))

        severity = rng.choices((0, 1, 2), weights=config.severity_mix)[0]
        created = start + timedelta(minutes=offsets[i])
        cores, suffixes, vocab = SYMPTOM_FAMILIES[sf]

        host = None
        if rng.random() < config.host_prob:
            host = rng.choice([
                f"na{rng.randrange(1, 99)}",
                f"cs{rng.randrange(1, 300)}",
                f"app{rng.randrange(1, 9)}-na{rng.randrange(1, 99)}",
                f"pod{rng.randrange(1, 60)}",
            ])

        parts = []
        if rng.random() < 0.35:
            parts.append(rng.choice(MODIFIERS))
        parts.append(rng.choice(cores))
        if rng.random() < 0.6:
            parts.append(rng.choice(suffixes))
        subject_body = noiser.apply(" ".join(parts))
        subject = subject_body.capitalize()
        if host:
            if rng.random() < 0.75:
                subject = f"{host.upper()} - {subject}"
            else:
                subject = f"{subject} on {host}"

        n_updates = max(1, _INV_UPDATES[severity] + rng.choice((-1, 0, 0, 1)))
        updates = []
        for u in range(n_updates):
            sents = [noiser.apply(_fill(rng.choice(TOPICAL_TEMPLATES), rng, vocab))]
            extra = 2 if severity == 0 else 1
            for _ in range(extra):
                if rng.random() < config.distractor_rate:
                    sents.append(noiser.apply(rng.choice(CHATTER_SENTENCES)))
            updates.append(InvestigationUpdate(
                created + timedelta(minutes=12 + 25 * u), " ".join(sents)))

        # RCA document: filler narrative around exactly one planted cue.
        rc_span = noiser.apply(_span_from(ROOT_CAUSE_FAMILIES[rf], rng))
        truth.planted_root_cause[iid] = rc_span
        n_fill = max(1, round(_RCA_FILLERS[severity] * rng.uniform(0.75, 1.25)))
        rca_sents = []
        for _ in range(n_fill):
            if rng.random() < 0.55:
                rca_sents.append(noiser.apply(_fill(rng.choice(RCA_FILLER_TEMPLATES), rng, vocab)))
            else:
                rca_sents.append(noiser.apply(rng.choice(RCA_FILLER_GENERIC)))
        cue_leader = rng.choice(ROOT_CAUSE_CUES)
        cue_sentence = noiser.apply(cue_leader.split("{span}")[0].rstrip()) + " " + rc_span + "."
        cue_pos = max(0, min(len(rca_sents), round(len(rca_sents) * rng.uniform(0.5, 0.8))))
        rca_sents.insert(cue_pos, cue_sentence)
        if rng.random() < config.decoy_cue_prob:
            decoy_span = _span_from(ROOT_CAUSE_FAMILIES[rf], rng)
            decoy = rng.choice(ROOT_CAUSE_DECOYS).format(d=decoy_span)
            rca_sents.insert(rng.randrange(cue_pos + 1, len(rca_sents) + 1), decoy)
        rca_doc = " ".join(rca_sents)

        # Resolution document, same construction.
        res_span = noiser.apply(_span_from(RESOLUTION_FAMILIES[resf], rng))
        truth.planted_resolution[iid] = res_span
        n_fill = max(0, _RES_FILLERS[severity] + rng.choice((-1, 0, 0, 1)))
        res_sents = [noiser.apply(rng.choice(RESOLUTION_FILLER)) for _ in range(n_fill)]
        cue_leader = rng.choice(RESOLUTION_CUES)
        cue_sentence = noiser.apply(cue_leader.split("{span}")[0].rstrip()) + " " + res_span + "."
        cue_pos = min(len(res_sents), 1 if res_sents else 0)
        res_sents.insert(cue_pos, cue_sentence)
        if rng.random() < config.decoy_cue_prob:
            decoy_span = _span_from(RESOLUTION_FAMILIES[resf], rng)
            decoy = rng.choice(RESOLUTION_DECOYS).format(d=decoy_span)
            res_sents.insert(rng.randrange(cue_pos + 1, len(res_sents) + 1), decoy)
        resolution_doc = " ".join(res_sents)

        records.append(PrbRecord(
            id=iid,
            subject=subject,
            severity=severity,
            created_at=created,
            investigation=updates,
            resolution_doc=resolution_doc,
            rca_doc=rca_doc,
            host=host,
        ))
    return records, truth
