#include "adamab/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace adamab::data {

using nlohmann::json;

ClassDataset ClassDataset::load_initial(const std::vector<Record>& records, int num_classes) {
    if (num_classes < 1) throw std::invalid_argument("load_initial: need at least one class");
    if (records.empty()) throw std::invalid_argument("load_initial: no records");

    ClassDataset ds;
    ds.num_classes_ = num_classes;
    ds.embed_dim_ = records.front().embedding.size();
    ds.by_class_.resize(static_cast<std::size_t>(num_classes));
    for (const Record& rec : records) {
        if (rec.label < 1 || rec.label > num_classes)
            throw std::invalid_argument("load_initial: class " + std::to_string(rec.label) +
                                        " outside 1.." + std::to_string(num_classes));
        check_dim(rec.embedding.size(), ds.embed_dim_, "load_initial record");
        Sample s;
        s.id = static_cast<long>(ds.samples_.size());
        s.embedding = rec.embedding;
        s.label = rec.label;
        s.origin = Origin::initial;
        ds.by_class_[static_cast<std::size_t>(rec.label - 1)].push_back(s.id);
        ds.samples_.push_back(std::move(s));
    }
    for (int c = 1; c <= num_classes; ++c)
        if (ds.by_class_[static_cast<std::size_t>(c - 1)].empty())
            throw std::invalid_argument("load_initial: class " + std::to_string(c) +
                                        " has no records");
    return ds;
}

void ClassDataset::check_class(int class_id) const {
    if (class_id < 1 || class_id > num_classes_)
        throw std::invalid_argument("invalid class " + std::to_string(class_id) + ", have 1.." +
                                    std::to_string(num_classes_));
}

std::size_t ClassDataset::class_count(int class_id) const {
    check_class(class_id);
    return by_class_[static_cast<std::size_t>(class_id - 1)].size();
}

std::vector<std::size_t> ClassDataset::counts() const {
    std::vector<std::size_t> out(by_class_.size());
    for (std::size_t c = 0; c < by_class_.size(); ++c) out[c] = by_class_[c].size();
    return out;
}

const std::vector<long>& ClassDataset::class_sample_ids(int class_id) const {
    check_class(class_id);
    return by_class_[static_cast<std::size_t>(class_id - 1)];
}

void ClassDataset::augment(int class_id, const std::vector<Vec>& embeddings, long round) {
    check_class(class_id);
    for (const Vec& e : embeddings) check_dim(e.size(), embed_dim_, "augment embedding");
    last_round_ = std::max(last_round_, round);
    for (const Vec& e : embeddings) {
        Sample s;
        s.id = static_cast<long>(samples_.size());
        s.embedding = e;
        s.label = class_id;
        s.origin = Origin::synthetic;
        s.round = round;
        by_class_[static_cast<std::size_t>(class_id - 1)].push_back(s.id);
        samples_.push_back(std::move(s));
    }
}

double ClassDataset::max_count_ratio() const {
    std::size_t lo = samples_.size(), hi = 0;
    for (const auto& ids : by_class_) {
        lo = std::min(lo, ids.size());
        hi = std::max(hi, ids.size());
    }
    return static_cast<double>(hi) / static_cast<double>(lo);
}

std::vector<std::vector<long>> ClassDataset::minibatches(std::size_t batch_size,
                                                         std::uint64_t seed, long epoch) const {
    if (batch_size < 1) throw std::invalid_argument("minibatches: batch_size must be >= 1");
    std::vector<long> ids(samples_.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<long>(i);

    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(epoch)), ids.size()));
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(rng.below(i))]);

    std::vector<std::vector<long>> batches;
    for (std::size_t start = 0; start < ids.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, ids.size());
        batches.emplace_back(ids.begin() + static_cast<long>(start),
                             ids.begin() + static_cast<long>(end));
    }
    return batches;
}

namespace {

json parse_line(const std::string& line, const std::string& path, std::size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a JSON object");
    return j;
}

Vec parse_vector(const json& j, const std::string& where) {
    if (!j.contains("vector") || !j["vector"].is_array())
        throw std::runtime_error(where + ": missing 'vector' array");
    Vec v;
    v.reserve(j["vector"].size());
    for (const auto& x : j["vector"]) {
        if (!x.is_number()) throw std::runtime_error(where + ": non-numeric vector entry");
        v.push_back(x.get<double>());
    }
    return v;
}

}  // namespace

std::vector<Record> read_records(const std::string& path, const calib::LabelSet* labels) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open record file: " + path);
    std::vector<Record> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const json j = parse_line(line, path, lineno);
        Record rec;
        if (j.contains("id")) rec.id = j["id"].get<long>();
        if (!j.contains("class")) throw std::runtime_error(where + ": missing 'class'");
        if (j["class"].is_number_integer()) {
            rec.label = j["class"].get<int>();
        } else if (j["class"].is_string()) {
            if (labels == nullptr)
                throw std::runtime_error(where + ": class names need a label set to resolve");
            const std::string name = j["class"].get<std::string>();
            rec.label = 0;
            for (const auto& def : labels->all())
                if (def.name == name) rec.label = def.class_id;
            if (rec.label == 0) throw std::runtime_error(where + ": unknown class name '" + name + "'");
        } else {
            throw std::runtime_error(where + ": 'class' must be an integer or a name");
        }
        rec.embedding = parse_vector(j, where);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_records(const ClassDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open record file for writing: " + path);
    for (const Sample& s : ds.samples()) {
        json j;
        j["id"] = s.id;
        j["class"] = s.label;
        j["vector"] = s.embedding;
        j["origin"] = s.origin == Origin::initial ? "initial" : "synthetic";
        j["round"] = s.round;
        os << j.dump() << "\n";
    }
    if (!os) throw std::runtime_error("record file write failed: " + path);
}

calib::LabelSet read_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open label file: " + path);
    std::vector<calib::LabelDef> defs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const json j = parse_line(line, path, lineno);
        calib::LabelDef def;
        if (!j.contains("id")) throw std::runtime_error(where + ": missing 'id'");
        def.class_id = j["id"].get<int>();
        def.name = j.value("label", std::string());
        def.description = j.value("description", std::string());
        def.embedding = parse_vector(j, where);
        defs.push_back(std::move(def));
    }
    std::sort(defs.begin(), defs.end(),
              [](const auto& a, const auto& b) { return a.class_id < b.class_id; });
    return calib::LabelSet(std::move(defs));
}

void write_labels(const calib::LabelSet& labels, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open label file for writing: " + path);
    for (const auto& def : labels.all()) {
        json j;
        j["id"] = def.class_id;
        j["label"] = def.name;
        j["description"] = def.description;
        j["vector"] = def.embedding;
        os << j.dump() << "\n";
    }
    if (!os) throw std::runtime_error("label file write failed: " + path);
}

}  // namespace adamab::data
