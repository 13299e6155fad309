#include "nidsllm/explain.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/rng.hpp"
#include "text_table.hpp"

namespace nidsllm {

using json = nlohmann::json;

std::string_view cell_name(Cell cell) {
    switch (cell) {
        case Cell::tp: return "TP";
        case Cell::fp: return "FP";
        case Cell::tn: return "TN";
        case Cell::fn: return "FN";
    }
    return "TN";
}

Cell cell_of(int label, int verdict) {
    if (verdict == 1) return label == 1 ? Cell::tp : Cell::fp;
    return label == 1 ? Cell::fn : Cell::tn;
}

std::size_t ExemplarSet::size() const {
    std::size_t n = 0;
    for (const auto& [cell, list] : cells) n += list.size();
    return n;
}

ExemplarSet select_exemplars(std::span<const VerdictResult> verdicts, const FlowTable& table,
                             std::size_t n_per_cell, std::uint64_t seed) {
    if (verdicts.size() != table.size())
        throw ArgumentError("select_exemplars: " + std::to_string(verdicts.size()) +
                            " verdicts for " + std::to_string(table.size()) + " rows");
    std::map<Cell, std::vector<std::size_t>> positions;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const auto* v = std::get_if<Verdict>(&verdicts[i]);
        if (!v) continue;
        positions[cell_of(table[i].label(), v->value)].push_back(i);
    }

    ExemplarSet set;
    set.n_per_cell = n_per_cell;
    set.seed = seed;
    for (std::size_t c = 0; c < std::size(kAllCells); ++c) {
        const Cell cell = kAllCells[c];
        auto pool = positions[cell];
        set.available[cell] = pool.size();
        const auto take = std::min(n_per_cell, pool.size());
        Rng rng(Rng::derive(seed, c));
        // Partial Fisher-Yates: the first `take` slots become the sample.
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(take);
        std::sort(pool.begin(), pool.end());
        auto& out = set.cells[cell];
        for (const auto pos : pool)
            out.push_back({table[pos], std::get<Verdict>(verdicts[pos]), pos});
    }
    return set;
}

ChatRequest explanation_request(const Exemplar& exemplar, const PromptTemplate& tmpl,
                                const std::string& model_id) {
    ChatRequest request;
    request.model_id = model_id;
    request.messages = build_explanation_prompt(tmpl, encode_flow(exemplar.record), exemplar.verdict);
    request.temperature = kDefaultTemperature;
    request.max_tokens = kExplanationMaxTokens;
    request.request_tag = "explain-row-" + std::to_string(exemplar.record.source_row());
    return request;
}

std::vector<ExplanationRecord> generate_explanations(ChatBackend& backend,
                                                     const ExemplarSet& exemplars,
                                                     const PromptTemplate& tmpl,
                                                     const std::string& model_id,
                                                     const ProtocolRegistry& registry,
                                                     int workers) {
    std::vector<ExplanationRecord> records;
    for (const auto cell : kAllCells) {
        auto it = exemplars.cells.find(cell);
        if (it == exemplars.cells.end()) continue;
        for (const auto& ex : it->second) {
            records.push_back(ExplanationRecord{ex, cell, {}, {}, false, {}});
        }
    }

    auto run_one = [&](ExplanationRecord& r) {
        try {
            const auto response = backend.complete(explanation_request(r.exemplar, tmpl, model_id));
            r.explanation_text = response.content;
        } catch (const std::exception& e) {
            r.error = e.what();
            return;
        }
        const bool blank = std::all_of(r.explanation_text.begin(), r.explanation_text.end(),
                                       [](unsigned char c) { return std::isspace(c); });
        if (blank) {
            r.empty_response = true;
            return;
        }
        r.claims = extract_claims(r.explanation_text, r.exemplar.record.schema(), registry);
    };

    if (workers <= 1 || records.size() <= 1) {
        for (auto& r : records) run_one(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), records.size());
        for (std::size_t t = 0; t < n; ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < records.size();) run_one(records[i]);
            });
    }
    return records;
}

std::vector<ExplanationRecord> generate_explanations(const BackendConfig& config,
                                                     const ExemplarSet& exemplars,
                                                     const PromptTemplate& tmpl,
                                                     const std::string& model_id) {
    auto backend = make_backend(config);
    return generate_explanations(*backend, exemplars, tmpl, model_id, ProtocolRegistry::builtin(),
                                 config.max_in_flight);
}

std::vector<FactCheckFinding> fact_check(const ExplanationRecord& explanation,
                                         const ProtocolRegistry& registry) {
    return fact_check(explanation.claims, explanation.exemplar.record, registry);
}

std::optional<double> hallucination_rate(std::span<const FactCheckFinding> findings) {
    std::size_t supported = 0;
    std::size_t contradicted = 0;
    for (const auto& f : findings) {
        if (f.status == FindingStatus::supported) ++supported;
        else if (f.status == FindingStatus::contradicted_by_flow ||
                 f.status == FindingStatus::contradicted_by_registry)
            ++contradicted;
    }
    if (supported + contradicted == 0) return std::nullopt;
    return static_cast<double>(contradicted) / static_cast<double>(supported + contradicted);
}

namespace {

void accumulate(CellDigest& d, const CheckedExplanation& e) {
    ++d.explanations;
    d.claims += e.findings.size();
    for (const auto& f : e.findings) ++d.by_status[f.status];
}

void finish(CellDigest& d) {
    const auto supported = d.by_status[FindingStatus::supported];
    const auto contradicted = d.by_status[FindingStatus::contradicted_by_flow] +
                              d.by_status[FindingStatus::contradicted_by_registry];
    d.by_status[FindingStatus::unverifiable] += 0;
    if (supported + contradicted > 0)
        d.hallucination_rate =
            static_cast<double>(contradicted) / static_cast<double>(supported + contradicted);
}

json digest_json(const CellDigest& d) {
    json counts = json::object();
    for (auto s : {FindingStatus::supported, FindingStatus::contradicted_by_flow,
                   FindingStatus::contradicted_by_registry, FindingStatus::unverifiable}) {
        auto it = d.by_status.find(s);
        counts[std::string(finding_status_name(s))] = it == d.by_status.end() ? 0 : it->second;
    }
    json j = {{"available", d.available},
              {"explanations", d.explanations},
              {"claims", d.claims},
              {"by_status", std::move(counts)}};
    j["hallucination_rate"] = d.hallucination_rate ? json(*d.hallucination_rate) : json(nullptr);
    return j;
}

std::string rate_text(const std::optional<double>& rate) {
    return rate ? detail::fixed(*rate, 3) : std::string("n/a (no decided claims)");
}

std::string counts_text(const CellDigest& d) {
    std::string out;
    for (auto s : {FindingStatus::supported, FindingStatus::contradicted_by_flow,
                   FindingStatus::contradicted_by_registry, FindingStatus::unverifiable}) {
        auto it = d.by_status.find(s);
        if (!out.empty()) out += ", ";
        out += std::string(finding_status_name(s)) + " " +
               std::to_string(it == d.by_status.end() ? 0 : it->second);
    }
    return out;
}

}  // namespace

ExplanationReport build_explanation_report(const ExemplarSet& exemplars,
                                           std::vector<ExplanationRecord> records,
                                           const ProtocolRegistry& registry,
                                           std::string model_id, std::string template_version) {
    ExplanationReport report;
    report.model_id = std::move(model_id);
    report.template_version = std::move(template_version);
    report.registry_version = registry.version();
    report.seed = exemplars.seed;
    report.n_per_cell = exemplars.n_per_cell;
    for (const auto cell : kAllCells) {
        auto& d = report.cells[cell];
        auto it = exemplars.available.find(cell);
        d.available = it == exemplars.available.end() ? 0 : it->second;
        report.overall.available += d.available;
    }
    for (auto& r : records) {
        auto findings = fact_check(r, registry);
        CheckedExplanation e{std::move(r), std::move(findings)};
        accumulate(report.cells[e.record.cell], e);
        accumulate(report.overall, e);
        report.explanations.push_back(std::move(e));
    }
    for (auto& [cell, d] : report.cells) finish(d);
    finish(report.overall);
    return report;
}

std::string to_json(const ExplanationReport& report) {
    json j;
    j["model_id"] = report.model_id;
    j["template_version"] = report.template_version;
    j["registry_version"] = report.registry_version;
    j["seed"] = report.seed;
    j["n_per_cell"] = report.n_per_cell;
    j["overall"] = digest_json(report.overall);
    json cells = json::object();
    for (const auto cell : kAllCells) {
        const auto name = std::string(cell_name(cell));
        auto it = report.cells.find(cell);
        json c = it == report.cells.end() ? digest_json({}) : digest_json(it->second);
        json items = json::array();
        for (const auto& e : report.explanations) {
            if (e.record.cell != cell) continue;
            const auto& ex = e.record.exemplar;
            json findings = json::array();
            for (const auto& f : e.findings) {
                findings.push_back({{"kind", claim_kind_name(f.claim.kind)},
                                    {"subject_field", f.claim.subject_field},
                                    {"asserted", f.claim.asserted},
                                    {"span", {f.claim.span.begin, f.claim.span.end}},
                                    {"excerpt", f.claim.excerpt},
                                    {"status", finding_status_name(f.status)},
                                    {"evidence", f.evidence},
                                    {"notes", f.notes}});
            }
            items.push_back({{"position", ex.position},
                             {"source_row", ex.record.source_row()},
                             {"label", ex.record.label()},
                             {"attack", ex.record.attack_type()},
                             {"verdict", ex.verdict.value},
                             {"explanation", e.record.explanation_text},
                             {"empty_response", e.record.empty_response},
                             {"error", e.record.error},
                             {"findings", std::move(findings)}});
        }
        c["samples"] = std::move(items);
        cells[name] = std::move(c);
    }
    j["cells"] = std::move(cells);
    return j.dump(2);
}

std::string to_text(const ExplanationReport& report) {
    std::string out = "Explanation fact-check report\n";
    out += "model: " + report.model_id + ", template: " + report.template_version +
           ", registry: " + report.registry_version + ", seed: " + std::to_string(report.seed) +
           ", per cell: " + std::to_string(report.n_per_cell) + "\n";
    out += "overall hallucination rate: " + rate_text(report.overall.hallucination_rate) + "\n";
    out += "overall claims: " + counts_text(report.overall) + "\n";

    std::vector<std::vector<std::string>> rows;
    for (const auto cell : kAllCells) {
        const auto& d = report.cells.at(cell);
        rows.push_back({std::string(cell_name(cell)), std::to_string(d.available),
                        std::to_string(d.explanations), std::to_string(d.claims),
                        d.hallucination_rate ? detail::fixed(*d.hallucination_rate, 3) : "n/a"});
    }
    out += "\n" + detail::render_table({"Cell", "Available", "Explained", "Claims", "Hallucination"},
                                       rows);

    for (const auto cell : kAllCells) {
        const auto& d = report.cells.at(cell);
        out += "\n== " + std::string(cell_name(cell)) + " ==\n";
        if (d.explanations == 0) {
            out += "no samples\n";
            continue;
        }
        out += "hallucination rate: " + rate_text(d.hallucination_rate) + "\n";
        out += "claims: " + counts_text(d) + "\n";
        for (const auto& e : report.explanations) {
            if (e.record.cell != cell) continue;
            const auto& ex = e.record.exemplar;
            out += "\n-- row " + std::to_string(ex.record.source_row()) + " (label " +
                   std::to_string(ex.record.label()) + ", verdict " +
                   std::to_string(ex.verdict.value) + ", attack " + ex.record.attack_type() + ")\n";
            if (!e.record.error.empty()) {
                out += "error: " + e.record.error + "\n";
                continue;
            }
            if (e.record.empty_response) {
                out += "empty response\n";
                continue;
            }
            for (const auto& f : e.findings) {
                out += "  [" + std::string(finding_status_name(f.status)) + "] " +
                       std::string(claim_kind_name(f.claim.kind)) + ": \"" + f.claim.excerpt +
                       "\"\n";
                if (!f.evidence.empty()) out += "      evidence: " + f.evidence + "\n";
                for (const auto& n : f.notes) out += "      note: " + n + "\n";
            }
        }
    }
    return out;
}

void write_explanation_report(const ExplanationReport& report, const std::filesystem::path& stem) {
    auto write = [](const std::filesystem::path& p, const std::string& body) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + p.string());
        out << body;
        if (body.empty() || body.back() != '\n') out << '\n';
        if (!out) throw IoError("failed writing " + p.string());
    };
    auto json_path = stem;
    json_path += ".json";
    auto text_path = stem;
    text_path += ".txt";
    write(json_path, to_json(report));
    write(text_path, to_text(report));
}

}  // namespace nidsllm
