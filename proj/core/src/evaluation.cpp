#include "motseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "motseg/error.hpp"

namespace motseg {

LiftRule parse_lift_rule(const std::string& name) {
    if (name == "any") return LiftRule::kAny;
    if (name == "majority") return LiftRule::kMajority;
    throw ConfigError("unknown lift rule '" + name + "' (expected any or majority)");
}

std::string to_string(LiftRule rule) {
    return rule == LiftRule::kAny ? "any" : "majority";
}

std::vector<std::uint8_t> lift_labels(const PointLabels& labels, const Voxelization& vox,
                                      LiftRule rule) {
    std::vector<std::uint8_t> out(vox.coords.size(), 0);
    for (std::size_t v = 0; v < vox.coords.size(); ++v) {
        std::size_t moving = 0;
        for (std::int32_t idx : vox.point_lists[v]) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= labels.moving.size())
                throw DataError("point index " + std::to_string(idx) +
                                " outside label array of " +
                                std::to_string(labels.moving.size()));
            if (labels.moving[static_cast<std::size_t>(idx)]) ++moving;
        }
        if (rule == LiftRule::kAny)
            out[v] = moving > 0 ? 1 : 0;
        else
            out[v] = 2 * moving > vox.point_lists[v].size() ? 1 : 0;
    }
    return out;
}

FrameEval frame_iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
                    int frame_index) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("prediction and truth masks differ in length: " +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()));
    FrameEval ev;
    ev.frame_index = frame_index;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i])
            ++ev.tp;
        else if (pred[i])
            ++ev.fp;
        else if (truth[i])
            ++ev.fn;
    }
    const std::size_t denom = ev.tp + ev.fp + ev.fn;
    ev.empty_pair = denom == 0;
    ev.iou = denom == 0 ? 1.0 : static_cast<double>(ev.tp) / static_cast<double>(denom);
    return ev;
}

FrameEval frame_iou(const std::vector<VoxelCoord>& pred, const std::vector<VoxelCoord>& truth,
                    const std::vector<VoxelCoord>& universe, int frame_index) {
    std::unordered_set<VoxelCoord, VoxelCoordHash> uni(universe.begin(), universe.end());
    auto check = [&](const std::vector<VoxelCoord>& mask, const char* which) {
        for (const VoxelCoord& c : mask)
            if (!uni.count(c))
                throw DataError(std::string(which) + " mask voxel (" + std::to_string(c.x) + "," +
                                std::to_string(c.y) + "," + std::to_string(c.z) +
                                ") is not an occupied voxel of the frame");
    };
    check(pred, "prediction");
    check(truth, "truth");

    std::unordered_set<VoxelCoord, VoxelCoordHash> t(truth.begin(), truth.end());
    std::unordered_set<VoxelCoord, VoxelCoordHash> p(pred.begin(), pred.end());
    FrameEval ev;
    ev.frame_index = frame_index;
    for (const VoxelCoord& c : p)
        if (t.count(c))
            ++ev.tp;
        else
            ++ev.fp;
    for (const VoxelCoord& c : t)
        if (!p.count(c)) ++ev.fn;
    const std::size_t denom = ev.tp + ev.fp + ev.fn;
    ev.empty_pair = denom == 0;
    ev.iou = denom == 0 ? 1.0 : static_cast<double>(ev.tp) / static_cast<double>(denom);
    return ev;
}

SequenceEval sequence_miou(std::vector<FrameEval> frames) {
    if (frames.empty()) throw std::invalid_argument("mIoU over an empty frame list");
    SequenceEval seq;
    double acc = 0.0;
    for (const FrameEval& f : frames) acc += f.iou;
    seq.miou = acc / static_cast<double>(frames.size());
    seq.frames = std::move(frames);
    return seq;
}

void write_predictions_csv(std::ostream& out, std::vector<VoxelPrediction> rows) {
    std::sort(rows.begin(), rows.end(), [](const VoxelPrediction& a, const VoxelPrediction& b) {
        if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
        return a.coord < b.coord;
    });
    out << "ix,iy,iz,t,label\n";
    for (const VoxelPrediction& r : rows)
        out << r.coord.x << ',' << r.coord.y << ',' << r.coord.z << ',' << r.frame_index << ','
            << static_cast<int>(r.moving ? 1 : 0) << '\n';
    if (!out) throw IoError("failed writing prediction rows");
}

void write_predictions_csv_file(const std::string& path, std::vector<VoxelPrediction> rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_predictions_csv(out, std::move(rows));
}

std::vector<VoxelPrediction> read_predictions_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty prediction file");
    if (line != "ix,iy,iz,t,label")
        throw DataError("unexpected prediction header '" + line + "'");
    std::vector<VoxelPrediction> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        VoxelPrediction r;
        int label = 0;
        char c1, c2, c3, c4;
        std::istringstream ss(line);
        if (!(ss >> r.coord.x >> c1 >> r.coord.y >> c2 >> r.coord.z >> c3 >> r.frame_index >>
              c4 >> label) ||
            c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
            throw DataError("malformed prediction row at line " + std::to_string(lineno) + ": '" +
                            line + "'");
        if (label != 0 && label != 1)
            throw DataError("prediction label must be 0 or 1, got " + std::to_string(label) +
                            " at line " + std::to_string(lineno));
        r.moving = static_cast<std::uint8_t>(label);
        rows.push_back(r);
    }
    return rows;
}

std::vector<VoxelPrediction> read_predictions_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return read_predictions_csv(in);
}

void SweepAxes::validate() const {
    if (r.empty() || e.empty() || k.empty() || w.empty())
        throw ConfigError("every sweep axis needs at least one value");
}

SweepTable sweep(const SweepAxes& axes, const std::vector<std::string>& scenes,
                 const std::function<double(const SweepConfig&, const std::string&)>& handle) {
    axes.validate();
    if (scenes.empty()) throw std::invalid_argument("sweep needs at least one scene");
    SweepTable table;
    table.scenes = scenes;
    for (int r : axes.r)
        for (int e : axes.e)
            for (int k : axes.k)
                for (int w : axes.w) {
                    SweepCell cell;
                    cell.config = {r, e, k, w};
                    try {
                        double acc = 0.0;
                        for (const std::string& scene : scenes) {
                            const double miou = handle(cell.config, scene);
                            cell.scene_miou.push_back(miou);
                            acc += miou;
                        }
                        cell.mean = acc / static_cast<double>(scenes.size());
                        double var = 0.0;
                        for (double m : cell.scene_miou) var += (m - cell.mean) * (m - cell.mean);
                        cell.stddev = std::sqrt(var / static_cast<double>(scenes.size()));
                    } catch (const std::exception& ex) {
                        cell.failed = true;
                        cell.scene_miou.clear();
                        cell.error = ex.what();
                    }
                    table.cells.push_back(std::move(cell));
                }
    return table;
}

std::vector<AxisAggregate> axis_aggregates(const SweepTable& table) {
    struct Key {
        const char* axis;
        int (*get)(const SweepConfig&);
    };
    static const Key keys[4] = {
        {"r", [](const SweepConfig& c) { return c.r; }},
        {"e", [](const SweepConfig& c) { return c.e; }},
        {"k", [](const SweepConfig& c) { return c.k; }},
        {"w", [](const SweepConfig& c) { return c.w; }},
    };

    std::vector<AxisAggregate> out;
    for (const Key& key : keys) {
        std::vector<int> values;
        for (const SweepCell& cell : table.cells) {
            const int v = key.get(cell.config);
            if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
        }
        std::sort(values.begin(), values.end());
        for (int v : values) {
            AxisAggregate agg;
            agg.axis = key.axis;
            agg.value = v;
            double acc = 0.0;
            std::vector<double> means;
            for (const SweepCell& cell : table.cells) {
                if (cell.failed || key.get(cell.config) != v) continue;
                means.push_back(cell.mean);
                acc += cell.mean;
            }
            agg.cells = means.size();
            if (!means.empty()) {
                agg.mean = acc / static_cast<double>(means.size());
                double var = 0.0;
                for (double m : means) var += (m - agg.mean) * (m - agg.mean);
                agg.stddev = std::sqrt(var / static_cast<double>(means.size()));
            }
            out.push_back(agg);
        }
    }
    return out;
}

namespace {

// keep cell text single-line and comma-free for the CSV
std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
    out << "r,e,k,w";
    for (const std::string& scene : table.scenes) out << ',' << sanitize(scene);
    out << ",mean,std,error\n";
    out << std::setprecision(6) << std::fixed;
    for (const SweepCell& cell : table.cells) {
        out << cell.config.r << ',' << cell.config.e << ',' << cell.config.k << ','
            << cell.config.w;
        if (cell.failed) {
            for (std::size_t i = 0; i < table.scenes.size(); ++i) out << ',';
            out << ",,," << sanitize(cell.error) << '\n';
        } else {
            for (double m : cell.scene_miou) out << ',' << m;
            out << ',' << cell.mean << ',' << cell.stddev << ",\n";
        }
    }
    if (!out) throw IoError("failed writing sweep table");
}

void write_axis_csv(std::ostream& out, const std::vector<AxisAggregate>& aggregates) {
    out << "axis,value,mean,std,cells\n";
    out << std::setprecision(6) << std::fixed;
    for (const AxisAggregate& a : aggregates)
        out << a.axis << ',' << a.value << ',' << a.mean << ',' << a.stddev << ',' << a.cells
            << '\n';
    if (!out) throw IoError("failed writing axis aggregates");
}

}  // namespace motseg
