#pragma once

// Class-partitioned, append-only sample store: per-class counts, augmentation
// append with round provenance, deterministic minibatch iteration, and the
// line-delimited record file format.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adamab/calibrator.hpp"
#include "adamab/common.hpp"

namespace adamab::data {

enum class Origin { initial, synthetic };

struct Sample {
    long id = 0;  // assigned monotonically at insertion
    Vec embedding;
    int label = 0;  // 1..K
    Origin origin = Origin::initial;
    long round = 0;  // generation round for synthetic samples, 0 otherwise
};

// One line of a record file, before ingestion.
struct Record {
    std::optional<long> id;
    int label = 0;
    Vec embedding;
};

class ClassDataset {
public:
    // Every class in 1..num_classes must be covered and all dims must agree.
    static ClassDataset load_initial(const std::vector<Record>& records, int num_classes);

    int num_classes() const { return num_classes_; }
    std::size_t embed_dim() const { return embed_dim_; }
    std::size_t size() const { return samples_.size(); }   // n
    std::size_t class_count(int class_id) const;           // n_C
    std::vector<std::size_t> counts() const;
    long last_round() const { return last_round_; }  // latest augmentation round, 0 initially

    const Sample& sample(long id) const { return samples_.at(static_cast<std::size_t>(id)); }
    const std::vector<Sample>& samples() const { return samples_; }
    const std::vector<long>& class_sample_ids(int class_id) const;

    // Appends delta-n synthetic samples of one class, tagged with the round.
    void augment(int class_id, const std::vector<Vec>& embeddings, long round);

    // max over class pairs of n_C / n_C'
    double max_count_ratio() const;

    // Seeded permutation of all current sample ids, chunked into batches of
    // batch_size (last one may be short). Identical (seed, epoch, n) give
    // identical batches.
    std::vector<std::vector<long>> minibatches(std::size_t batch_size, std::uint64_t seed,
                                               long epoch) const;

private:
    ClassDataset() = default;
    void check_class(int class_id) const;

    int num_classes_ = 0;
    std::size_t embed_dim_ = 0;
    long last_round_ = 0;
    std::vector<Sample> samples_;              // indexed by id
    std::vector<std::vector<long>> by_class_;  // sample ids per class
};

// Record files are line-delimited JSON objects with fields
//   {"id": <int, optional>, "class": <int or label name>, "vector": [d_e reals]}
// plus, on export, {"origin": "initial"|"synthetic", "round": <int>}.
// A label set enables class-name resolution; without one, classes must be integers.
std::vector<Record> read_records(const std::string& path, const calib::LabelSet* labels = nullptr);
void write_records(const ClassDataset& ds, const std::string& path);

// Label files are line-delimited JSON objects
//   {"id": <1..K>, "label": <name>, "description": <text, optional>, "vector": [d_e reals]}
calib::LabelSet read_labels(const std::string& path);
void write_labels(const calib::LabelSet& labels, const std::string& path);

}  // namespace adamab::data
