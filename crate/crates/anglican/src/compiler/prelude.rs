//! Higher-order library functions compiled from query-language source.
//!
//! These cannot be host primitives: their function arguments may contain
//! sample and observe forms, so the calls must flow through the same
//! continuation discipline as user code. They are loaded ahead of every
//! program, and their names stay shadowable like any other binding.

pub const PRELUDE: &str = r#"
(defm map
  "Applies f elementwise; given several collections, walks them in step and
  stops at the shortest."
  [f & colls]
  (let [step (fn step [g xs]
               (if (empty? xs)
                 (list)
                 (cons (g (first xs)) (step g (rest xs)))))]
    (cond
      (empty? colls) (list)
      (empty? (rest colls)) (step f (first colls))
      (some empty? colls) (list)
      :else (cons (apply f (step first colls))
                  (apply map f (step rest colls))))))

(defm reduce
  "Folds f left to right; without a seed, the collection's first element
  starts the fold."
  [f & args]
  (let [seeded (= (count args) 2)
        init (if seeded (first args) (first (first args)))
        coll (if seeded (second args) (rest (first args)))]
    (loop [acc init items coll]
      (if (empty? items)
        acc
        (recur (f acc (first items)) (rest items))))))

(defm filter
  "Keeps the elements of coll for which pred is truthy."
  [pred coll]
  (cond
    (empty? coll) (list)
    (pred (first coll)) (cons (first coll) (filter pred (rest coll)))
    :else (filter pred (rest coll))))

(defm some
  "First truthy result of pred over coll, or nil."
  [pred coll]
  (if (empty? coll)
    nil
    (let [hit (pred (first coll))]
      (if hit hit (some pred (rest coll))))))

(defm repeatedly
  "List of the results of n calls of f."
  [n f]
  (if (<= n 0)
    (list)
    (cons (f) (repeatedly (dec n) f))))

(defm comp
  "Composition of functions, applied right to left."
  [& fs]
  (cond
    (empty? fs) (fn [x] x)
    (empty? (rest fs)) (first fs)
    :else (let [f (first fs)
                g (apply comp (rest fs))]
            (fn [& args] (f (apply g args))))))

(defm partial
  "Fixes the leading arguments of f, giving a function of the remaining ones."
  [f & fixed]
  (fn [& more] (apply f (concat fixed more))))
"#;
