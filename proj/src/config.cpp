// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The mbdelay Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "mbdelay/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mbdelay
{
    namespace pt = boost::property_tree;

    namespace
    {
        std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        }

        std::vector<std::string> split(const std::string &s, char sep)
        {
            std::vector<std::string> out;
            std::string item;
            std::istringstream ss(s);
            while (std::getline(ss, item, sep))
                out.push_back(trim(item));
            return out;
        }

        /// Key reader that records every key it was asked about so unknown keys can be reported.
        class Section
        {
        public:
            Section(const pt::ptree *tree, std::string name, std::string origin)
                : tree_(tree), name_(std::move(name)), origin_(std::move(origin))
            {
            }

            std::optional<std::string> raw(const std::string &key)
            {
                known_.insert(key);
                if (!tree_)
                    return std::nullopt;
                const auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
                if (!v)
                    return std::nullopt;
                return trim(*v);
            }

            void number(const std::string &key, double &out)
            {
                if (auto v = raw(key))
                    out = to_double(key, *v);
            }

            void number_list(const std::string &key, std::vector<double> &out, double scale = 1.0)
            {
                if (auto v = raw(key))
                {
                    out.clear();
                    for (const auto &item : split(*v, ','))
                        out.push_back(to_double(key, item) * scale);
                }
            }

            template <typename Int>
            void integer(const std::string &key, Int &out)
            {
                if (auto v = raw(key))
                    out = static_cast<Int>(to_integer(key, *v));
            }

            void optional_integer(const std::string &key, std::optional<int> &out)
            {
                if (auto v = raw(key))
                {
                    if (*v == "auto" || v->empty())
                        out.reset();
                    else
                        out = static_cast<int>(to_integer(key, *v));
                }
            }

            void boolean(const std::string &key, bool &out)
            {
                if (auto v = raw(key))
                {
                    std::string s = *v;
                    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
                    if (s == "true" || s == "yes" || s == "1" || s == "on")
                        out = true;
                    else if (s == "false" || s == "no" || s == "0" || s == "off")
                        out = false;
                    else
                        fail(key, "expected a boolean, got '" + *v + "'");
                }
            }

            template <typename Parse, typename T>
            void enumerated(const std::string &key, T &out, Parse parse)
            {
                if (auto v = raw(key))
                {
                    try
                    {
                        out = parse(*v);
                    }
                    catch (const std::invalid_argument &e)
                    {
                        fail(key, e.what());
                    }
                }
            }

            void check_unknown() const
            {
                if (!tree_)
                    return;
                for (const auto &[key, _] : *tree_)
                    if (!known_.count(key))
                        throw ConfigError(origin_ + ": unknown key '" + key + "' in [" + name_ + "]");
            }

            [[noreturn]] void fail(const std::string &key, const std::string &what) const
            {
                throw ConfigError(origin_ + ": [" + name_ + "] " + key + ": " + what);
            }

        private:
            double to_double(const std::string &key, const std::string &text) const
            {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
                    fail(key, "expected a number, got '" + text + "'");
                return v;
            }

            long long to_integer(const std::string &key, const std::string &text) const
            {
                long long v = 0;
                const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
                    fail(key, "expected an integer, got '" + text + "'");
                return v;
            }

            const pt::ptree *tree_;
            std::string name_;
            std::string origin_;
            std::set<std::string> known_;
        };

        pt::ptree read_tree(const std::string &text, const std::string &origin)
        {
            pt::ptree tree;
            std::istringstream in(text);
            try
            {
                pt::read_ini(in, tree);
            }
            catch (const pt::ini_parser_error &e)
            {
                throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
            }
            return tree;
        }

        std::string read_file(const std::filesystem::path &path)
        {
            std::ifstream in(path);
            if (!in)
                throw ConfigError("cannot open config " + path.string());
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }

        const pt::ptree *child(const pt::ptree &tree, const std::string &name)
        {
            const auto c = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
            return c ? &*c : nullptr;
        }

        std::vector<Point2> parse_points(Section &sec, const std::string &key)
        {
            std::vector<Point2> pts;
            const auto v = sec.raw(key);
            if (!v)
                return pts;
            for (const auto &item : split(*v, ';'))
            {
                if (item.empty())
                    continue;
                std::istringstream ss(item);
                Point2 p{};
                std::string extra;
                if (!(ss >> p[0] >> p[1]) || (ss >> extra))
                    sec.fail(key, "expected 'x y' pairs separated by ';', got '" + item + "'");
                pts.push_back(p);
            }
            return pts;
        }
    }

    std::string to_string(MdlDimension d)
    {
        return d == MdlDimension::kMinDimension ? "min_dimension" : "hankel_columns";
    }

    MdlDimension parse_mdl_dimension(const std::string &name)
    {
        if (name == "min_dimension")
            return MdlDimension::kMinDimension;
        if (name == "hankel_columns")
            return MdlDimension::kHankelColumns;
        throw std::invalid_argument("unknown MDL dimension '" + name + "' (expected min_dimension or hankel_columns)");
    }

    Scenario parse_scenario(const std::string &ini_text, const std::string &origin)
    {
        const pt::ptree tree = read_tree(ini_text, origin);
        static const std::set<std::string> sections{"scenario", "channel", "bands", "estimator", "positioning"};
        for (const auto &[name, sub] : tree)
        {
            if (!sections.count(name))
                throw ConfigError(origin + ": unknown section [" + name + "]");
        }

        Scenario sc;
        Section s(child(tree, "scenario"), "scenario", origin);
        if (auto v = s.raw("name"))
            sc.name = *v;
        s.integer("trials", sc.trials);
        s.integer("seed", sc.seed);
        s.number_list("snr_db", sc.snr_db);
        s.enumerated("method", sc.method, parse_method);
        s.check_unknown();

        Section c(child(tree, "channel"), "channel", origin);
        c.number_list("delays_ns", sc.delays_ns);
        c.number_list("powers_db", sc.powers_db);
        c.boolean("redraw_amplitudes", sc.redraw_amplitudes);
        c.check_unknown();

        Section b(child(tree, "bands"), "bands", origin);
        b.number_list("center_frequencies_ghz", sc.center_frequencies_hz, 1e9);
        b.number("subcarrier_spacing_hz", sc.subcarrier_spacing_hz);
        b.integer("n_subcarriers", sc.n_subcarriers);
        b.integer("snapshots", sc.m_snapshots);
        b.check_unknown();

        Section e(child(tree, "estimator"), "estimator", origin);
        e.optional_integer("p_rows", sc.p_rows);
        e.enumerated("variant", sc.variant, parse_variant);
        e.boolean("weighted", sc.weighted);
        e.enumerated("weight_rule", sc.weight_rule, parse_weight_rule);
        e.boolean("k_from_mdl", sc.k_from_mdl);
        e.optional_integer("k_order", sc.k_order);
        e.enumerated("mdl_dimension", sc.mdl_dimension, parse_mdl_dimension);
        e.integer("lm_iters", sc.lm_iters);
        e.integer("multistart", sc.multistart);
        e.number("grid_step_ns", sc.grid_step_ns);
        e.number("grid_max_ns", sc.grid_max_ns);
        e.check_unknown();

        try
        {
            sc.validate();
        }
        catch (const std::invalid_argument &err)
        {
            throw ConfigError(origin + ": " + err.what());
        }
        return sc;
    }

    Scenario load_scenario(const std::filesystem::path &path)
    {
        return parse_scenario(read_file(path), path.string());
    }

    PositioningSetup load_positioning(const std::filesystem::path &path)
    {
        const pt::ptree tree = read_tree(read_file(path), path.string());
        const pt::ptree *node = child(tree, "positioning");
        if (!node)
            throw ConfigError(path.string() + ": missing [positioning] section");
        Section sec(node, "positioning", path.string());
        PositioningSetup setup;
        setup.anchors = parse_points(sec, "anchors");
        setup.true_positions = parse_points(sec, "true_positions");
        sec.check_unknown();
        if (setup.anchors.size() < 3)
            throw ConfigError(path.string() + ": [positioning] needs at least three anchors");
        return setup;
    }
}
