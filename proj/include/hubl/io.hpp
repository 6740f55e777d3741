#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hubl/dataset.hpp"
#include "hubl/mdp.hpp"
#include "hubl/relabel.hpp"

namespace hubl {

/// File-system failures; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

/// Hash of the canonical (key-sorted, compact) serialization.
inline std::string config_hash(const Json& config) { return hex64(fnv1a64(config.dump())); }

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
    return os.str();
}

/// Writes through a temporary file and renames, so readers never see a
/// partially written artifact.
inline void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << contents;
        out.flush();
        if (!out) throw IoError("write failed on '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ValidationError(what + ": malformed JSON: " + e.what());
    }
}

namespace detail {

inline const Json& field(const Json& obj, const char* name, const std::string& where) {
    if (!obj.is_object() || !obj.contains(name)) throw ValidationError(where + ": missing field '" + name + "'");
    return obj.at(name);
}

template <typename T>
T get_as(const Json& j, const std::string& what) {
    try {
        return j.get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(what + ": wrong type");
    }
}

inline std::size_t get_index(const Json& j, const std::string& what) {
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ValidationError(what + ": expected a nonnegative integer");
    return j.get<std::size_t>();
}

} // namespace detail

// ---- MDP -------------------------------------------------------------------

inline Json to_json(const TabularMdp& mdp) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    Json p = Json::array(), r = Json::array();
    for (std::size_t s = 0; s < ns; ++s) {
        Json ps = Json::array(), rs = Json::array();
        for (std::size_t a = 0; a < na; ++a) {
            auto row = mdp.transition(s, a);
            ps.push_back(std::vector<double>(row.begin(), row.end()));
            rs.push_back(mdp.reward(s, a));
        }
        p.push_back(std::move(ps));
        r.push_back(std::move(rs));
    }
    auto d0 = mdp.initial_dist();
    return {{"n_states", ns},       {"n_actions", na}, {"gamma", mdp.gamma()},
            {"transition", p},      {"reward", r},     {"initial_dist", std::vector<double>(d0.begin(), d0.end())}};
}

inline TabularMdp mdp_from_json(const Json& j) {
    using detail::field;
    const std::string where = "mdp";
    const auto ns = detail::get_index(field(j, "n_states", where), "n_states");
    const auto na = detail::get_index(field(j, "n_actions", where), "n_actions");
    const auto& gj = field(j, "gamma", where);
    if (!gj.is_number()) throw ValidationError("gamma: expected a number");
    const double gamma = gj.get<double>();
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma: must lie in [0, 1), got " + gj.dump());

    const auto& pj = field(j, "transition", where);
    const auto& rj = field(j, "reward", where);
    if (!pj.is_array() || pj.size() != ns) throw ValidationError("transition: expected n_states rows");
    if (!rj.is_array() || rj.size() != ns) throw ValidationError("reward: expected n_states rows");
    std::vector<double> p, r;
    p.reserve(ns * na * ns);
    r.reserve(ns * na);
    for (std::size_t s = 0; s < ns; ++s) {
        if (!pj[s].is_array() || pj[s].size() != na)
            throw ValidationError("transition[" + std::to_string(s) + "]: expected n_actions rows");
        if (!rj[s].is_array() || rj[s].size() != na)
            throw ValidationError("reward[" + std::to_string(s) + "]: expected n_actions entries");
        for (std::size_t a = 0; a < na; ++a) {
            auto row = detail::get_as<std::vector<double>>(
                pj[s][a], "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
            if (row.size() != ns)
                throw ValidationError("transition[" + std::to_string(s) + "][" + std::to_string(a) +
                                      "]: expected n_states entries");
            p.insert(p.end(), row.begin(), row.end());
            r.push_back(detail::get_as<double>(rj[s][a], "reward[" + std::to_string(s) + "][" + std::to_string(a) + "]"));
        }
    }
    auto d0 = detail::get_as<std::vector<double>>(field(j, "initial_dist", where), "initial_dist");
    return TabularMdp(ns, na, gamma, std::move(p), std::move(r), std::move(d0));
}

// ---- Trajectories ----------------------------------------------------------

inline Json to_json(const Trajectory& tr) {
    Json states = Json::array(), actions = Json::array(), rewards = Json::array();
    for (const auto& st : tr.steps) {
        states.push_back(st.state);
        actions.push_back(st.action);
        rewards.push_back(st.reward);
    }
    return {{"states", states},
            {"actions", actions},
            {"rewards", rewards},
            {"final_state", tr.final_state},
            {"end", to_string(tr.end)}};
}

inline std::string trajectories_to_jsonl(const Dataset& data) {
    std::string out;
    for (const auto& tr : data.trajectories) {
        out += to_json(tr).dump();
        out += '\n';
    }
    return out;
}

/// Parses trajectory JSON Lines; errors name the 1-based line number.
inline std::vector<Trajectory> trajectories_from_jsonl(const std::string& text) {
    std::vector<Trajectory> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno);
        try {
            const Json j = parse_json(line, where);
            auto states = detail::get_as<std::vector<std::size_t>>(detail::field(j, "states", where), where + ": states");
            auto actions = detail::get_as<std::vector<std::size_t>>(detail::field(j, "actions", where), where + ": actions");
            auto rewards = detail::get_as<std::vector<double>>(detail::field(j, "rewards", where), where + ": rewards");
            if (states.size() != actions.size() || states.size() != rewards.size())
                throw ValidationError(where + ": states, actions and rewards differ in length (" +
                                      std::to_string(states.size()) + ", " + std::to_string(actions.size()) + ", " +
                                      std::to_string(rewards.size()) + ")");
            Trajectory tr;
            tr.final_state = detail::get_index(detail::field(j, "final_state", where), where + ": final_state");
            const auto end = detail::get_as<std::string>(detail::field(j, "end", where), where + ": end");
            if (end == "terminal")
                tr.end = EndKind::terminal;
            else if (end == "timeout")
                tr.end = EndKind::timeout;
            else
                throw ValidationError(where + ": end must be \"terminal\" or \"timeout\"");
            for (std::size_t t = 0; t < states.size(); ++t) tr.steps.push_back({states[t], actions[t], rewards[t]});
            try {
                validate(tr);
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
            out.push_back(std::move(tr));
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            if (msg.rfind(where, 0) == 0) throw;
            throw ValidationError(where + ": " + msg);
        }
    }
    if (out.empty()) throw ValidationError("dataset: no trajectories");
    return out;
}

/// Rejects indices outside the MDP.
inline void check_dims(const std::vector<Trajectory>& trajs, std::size_t ns, std::size_t na) {
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const auto& tr = trajs[i];
        bool ok = tr.final_state < ns;
        for (const auto& st : tr.steps) ok = ok && st.state < ns && st.action < na;
        if (!ok) throw ValidationError("line " + std::to_string(i + 1) + ": state or action index out of range");
    }
}

// ---- Relabeled tuples ------------------------------------------------------

inline std::string tuples_to_jsonl(const std::vector<RelabeledTuple>& tuples) {
    std::string out;
    for (const auto& t : tuples) {
        Json j = {{"s", t.state},         {"a", t.action},
                  {"s_next", t.next_state}, {"r_tilde", t.r_tilde},
                  {"gamma_tilde", t.gamma_tilde}, {"done", t.done}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string exact_double(double x) { return Json(x).dump(); }

} // namespace detail

inline std::string tuples_to_csv(const std::vector<RelabeledTuple>& tuples) {
    std::string out = "s,a,s_next,r_tilde,gamma_tilde,done\n";
    for (const auto& t : tuples) {
        out += std::to_string(t.state) + ',' + std::to_string(t.action) + ',' + std::to_string(t.next_state) + ',' +
               detail::exact_double(t.r_tilde) + ',' + detail::exact_double(t.gamma_tilde) + ',' +
               (t.done ? "true" : "false") + '\n';
    }
    return out;
}

inline std::vector<RelabeledTuple> tuples_from_jsonl(const std::string& text) {
    std::vector<RelabeledTuple> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno);
        const Json j = parse_json(line, where);
        RelabeledTuple t;
        t.state = detail::get_index(detail::field(j, "s", where), where + ": s");
        t.action = detail::get_index(detail::field(j, "a", where), where + ": a");
        t.next_state = detail::get_index(detail::field(j, "s_next", where), where + ": s_next");
        t.r_tilde = detail::get_as<double>(detail::field(j, "r_tilde", where), where + ": r_tilde");
        t.gamma_tilde = detail::get_as<double>(detail::field(j, "gamma_tilde", where), where + ": gamma_tilde");
        t.done = detail::get_as<bool>(detail::field(j, "done", where), where + ": done");
        out.push_back(t);
    }
    if (out.empty()) throw ValidationError("tuples: file is empty");
    return out;
}

inline std::vector<RelabeledTuple> tuples_from_csv(const std::string& text) {
    std::vector<RelabeledTuple> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != "s,a,s_next,r_tilde,gamma_tilde,done")
                throw ValidationError("line 1: expected header s,a,s_next,r_tilde,gamma_tilde,done");
            continue;
        }
        const std::string where = "line " + std::to_string(lineno);
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw ValidationError(where + ": expected 6 columns");
        try {
            RelabeledTuple t;
            std::size_t pos = 0;
            auto idx = [&](const std::string& c) {
                if (c.empty() || c[0] == '-') throw std::invalid_argument("negative");
                auto v = std::stoull(c, &pos);
                if (pos != c.size()) throw std::invalid_argument("trailing");
                return static_cast<std::size_t>(v);
            };
            auto num = [&](const std::string& c) {
                double v = std::stod(c, &pos);
                if (pos != c.size()) throw std::invalid_argument("trailing");
                return v;
            };
            t.state = idx(cells[0]);
            t.action = idx(cells[1]);
            t.next_state = idx(cells[2]);
            t.r_tilde = num(cells[3]);
            t.gamma_tilde = num(cells[4]);
            if (cells[5] == "true" || cells[5] == "1")
                t.done = true;
            else if (cells[5] == "false" || cells[5] == "0")
                t.done = false;
            else
                throw std::invalid_argument("done");
            out.push_back(t);
        } catch (const std::logic_error&) {
            throw ValidationError(where + ": malformed value");
        }
    }
    if (out.empty()) throw ValidationError("tuples: file is empty");
    return out;
}

// ---- Policies --------------------------------------------------------------

inline Json to_json(const Policy& pi) { return {{"actions", pi.actions()}}; }

inline Policy policy_from_json(const Json& j, std::size_t n_actions) {
    auto actions = detail::get_as<std::vector<std::size_t>>(detail::field(j, "actions", "policy"), "actions");
    return Policy::deterministic(std::move(actions), n_actions);
}

} // namespace hubl
