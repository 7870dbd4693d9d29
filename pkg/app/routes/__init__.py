# Profitable speed scaling batch API
from app.routes.run_routes import router as run_router
from app.routes.generator_routes import router as generator_router
