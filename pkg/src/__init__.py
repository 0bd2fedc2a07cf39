# Cholesky DAG scheduling lab package
